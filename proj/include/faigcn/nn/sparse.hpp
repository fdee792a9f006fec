// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

namespace faigcn::nn {

/// Compressed sparse rows; entries of each row sorted by column. May be
/// rectangular. Deterministic layout, so products reduce in a fixed order.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr;  ///< size rows+1
  std::vector<std::size_t> col_idx;
  std::vector<double> values;

  std::size_t nnz() const noexcept { return values.size(); }
  double at(std::size_t r, std::size_t c) const;
  SparseMatrix transposed() const;
  /// Keeps only the listed rows, in the given order.
  SparseMatrix select_rows(const std::vector<std::size_t>& rows_to_keep) const;
};

/// A constant sparse operand for sparse_matmul, with its transpose cached for
/// the backward pass.
struct SparseOperator {
  SparseMatrix matrix;
  SparseMatrix transpose;

  explicit SparseOperator(SparseMatrix m) : matrix(std::move(m)), transpose(matrix.transposed()) {}
};

}  // namespace faigcn::nn
