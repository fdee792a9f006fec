// SPDX-License-Identifier: Apache-2.0
#include "faigcn/nn/sparse.hpp"

#include <algorithm>

#include "faigcn/error.hpp"

namespace faigcn::nn {

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  auto first = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[r]);
  auto last = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[r + 1]);
  auto it = std::lower_bound(first, last, c);
  return (it != last && *it == c) ? values[static_cast<std::size_t>(it - col_idx.begin())] : 0.0;
}

SparseMatrix SparseMatrix::transposed() const {
  SparseMatrix t;
  t.rows = cols;
  t.cols = rows;
  t.row_ptr.assign(cols + 1, 0);
  for (auto c : col_idx) ++t.row_ptr[c + 1];
  for (std::size_t i = 0; i < cols; ++i) t.row_ptr[i + 1] += t.row_ptr[i];
  t.col_idx.resize(nnz());
  t.values.resize(nnz());
  std::vector<std::size_t> fill(t.row_ptr.begin(), t.row_ptr.end() - 1);
  for (std::size_t r = 0; r < rows; ++r) {
    for (auto k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      auto dst = fill[col_idx[k]]++;
      t.col_idx[dst] = r;
      t.values[dst] = values[k];
    }
  }
  return t;
}

SparseMatrix SparseMatrix::select_rows(const std::vector<std::size_t>& keep) const {
  SparseMatrix s;
  s.rows = keep.size();
  s.cols = cols;
  s.row_ptr.reserve(keep.size() + 1);
  s.row_ptr.push_back(0);
  for (auto r : keep) {
    if (r >= rows) throw DimensionError("row selection out of range");
    for (auto k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      s.col_idx.push_back(col_idx[k]);
      s.values.push_back(values[k]);
    }
    s.row_ptr.push_back(s.col_idx.size());
  }
  return s;
}

}  // namespace faigcn::nn
