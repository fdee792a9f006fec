// SPDX-License-Identifier: Apache-2.0
#include "faigcn/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>

#include "faigcn/error.hpp"

namespace faigcn::nn {

using detail::Node;

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

Tensor make_result(Shape shape, Buffer value, std::initializer_list<const Tensor*> inputs,
                   std::function<void(Node&)> bw) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs = false;
  if (grad_enabled()) {
    for (const Tensor* t : inputs) needs = needs || t->requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const Tensor* t : inputs) node->parents.push_back(t->node());
    node->backward = std::move(bw);
  }
  return Tensor::from_node(std::move(node));
}

// Parent k's gradient buffer, or nullptr when it takes no gradient.
double* parent_grad(Node& self, std::size_t k) {
  Node& p = *self.parents[k];
  return p.requires_grad ? p.grad_data() : nullptr;
}

// Like parent_grad, but a buffer allocated here is left uninitialized and
// flagged fresh: the caller must then write every element instead of adding.
struct GradTarget {
  double* data = nullptr;
  bool fresh = false;
};

GradTarget parent_grad_target(Node& self, std::size_t k) {
  Node& p = *self.parents[k];
  if (!p.requires_grad) return {};
  if (!p.grad.empty()) return {p.grad.data(), false};
  p.grad.resize(p.value.size());
  return {p.grad.data(), true};
}

// dst (+)= v * src over f elements; the first term of a fresh row assigns.
inline void axpy_row(double* __restrict dst, double v, const double* __restrict src, std::size_t f, bool assign) {
  if (assign) {
    for (std::size_t j = 0; j < f; ++j) dst[j] = v * src[j];
  } else {
    for (std::size_t j = 0; j < f; ++j) dst[j] += v * src[j];
  }
}

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                       shape_string(b.shape()));
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_string(x.shape()));
  }
}

void require_axis(const char* op, const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                         shape_string(x.shape()));
  }
}

// outer * n * inner decomposition around an axis.
struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.n = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

// Offsets of a and b for every output element under broadcasting.
struct Broadcast {
  Shape out;
  std::vector<std::size_t> a_off, b_off;
};

Broadcast broadcast(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank()) mismatch(op, a, b);
  const auto rank = a.rank();
  Broadcast r;
  r.out.resize(rank);
  for (std::size_t d = 0; d < rank; ++d) {
    auto x = a.dim(d), y = b.dim(d);
    if (x != y && x != 1 && y != 1) mismatch(op, a, b);
    r.out[d] = std::max(x, y);
  }
  const auto n = shape_numel(r.out);
  r.a_off.resize(n);
  r.b_off.resize(n);
  if (a.shape() == b.shape()) {
    for (std::size_t i = 0; i < n; ++i) r.a_off[i] = r.b_off[i] = i;
    return r;
  }
  std::vector<std::size_t> sa(rank), sb(rank);
  std::size_t acc_a = 1, acc_b = 1;
  for (std::size_t d = rank; d-- > 0;) {
    sa[d] = a.dim(d) == 1 ? 0 : acc_a;
    sb[d] = b.dim(d) == 1 ? 0 : acc_b;
    acc_a *= a.dim(d);
    acc_b *= b.dim(d);
  }
  std::vector<std::size_t> idx(rank, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t i = 0; i < n; ++i) {
    r.a_off[i] = oa;
    r.b_off[i] = ob;
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < r.out[d]) {
        oa += sa[d];
        ob += sb[d];
        break;
      }
      oa -= sa[d] * (r.out[d] - 1);
      ob -= sb[d] * (r.out[d] - 1);
      idx[d] = 0;
    }
  }
  return r;
}

enum class Arith { Add, Sub, Mul };

Tensor elementwise(const char* name, Arith kind, const Tensor& a, const Tensor& b) {
  auto bc = std::make_shared<Broadcast>(broadcast(name, a, b));
  const auto n = bc->a_off.size();
  Buffer out(n);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < n; ++i) {
    double x = av[bc->a_off[i]], y = bv[bc->b_off[i]];
    out[i] = kind == Arith::Add ? x + y : kind == Arith::Sub ? x - y : x * y;
  }
  return make_result(bc->out, std::move(out), {&a, &b}, [bc, kind](Node& self) {
    const double* g = self.grad.data();
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    const auto n = bc->a_off.size();
    if (double* ga = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < n; ++i) ga[bc->a_off[i]] += kind == Arith::Mul ? g[i] * bv[bc->b_off[i]] : g[i];
    }
    if (double* gb = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < n; ++i) {
        gb[bc->b_off[i]] += kind == Arith::Mul ? g[i] * av[bc->a_off[i]] : kind == Arith::Sub ? -g[i] : g[i];
      }
    }
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const auto m = a.dim(0), k = a.dim(1);
  const auto kb = transpose_b ? b.dim(1) : b.dim(0);
  const auto n = transpose_b ? b.dim(0) : b.dim(1);
  if (k != kb) mismatch("matmul", a, b);
  Buffer out(m * n);
  ConstMap A(a.values().data(), m, k);
  ConstMap B(b.values().data(), b.dim(0), b.dim(1));
  MutMap C(out.data(), m, n);
  if (transpose_b) {
    C.noalias() = A * B.transpose();
  } else {
    C.noalias() = A * B;
  }
  return make_result({m, n}, std::move(out), {&a, &b}, [m, k, n, transpose_b](Node& self) {
    ConstMap G(self.grad.data(), m, n);
    const auto& an = *self.parents[0];
    const auto& bn = *self.parents[1];
    ConstMap A(an.value.data(), m, k);
    ConstMap B(bn.value.data(), bn.shape[0], bn.shape[1]);
    if (double* ga = parent_grad(self, 0)) {
      MutMap GA(ga, m, k);
      if (transpose_b) {
        GA.noalias() += G * B;
      } else {
        GA.noalias() += G * B.transpose();
      }
    }
    if (double* gb = parent_grad(self, 1)) {
      MutMap GB(gb, bn.shape[0], bn.shape[1]);
      if (transpose_b) {
        GB.noalias() += G.transpose() * A;
      } else {
        GB.noalias() += A.transpose() * G;
      }
    }
  });
}

namespace {

// out[block] += M * x[block], rows of width f.
void spmm_accumulate(const SparseMatrix& m, const double* x, double* out, std::size_t batch, std::size_t f) {
  for (std::size_t blk = 0; blk < batch; ++blk) {
    const double* xb = x + blk * m.cols * f;
    double* ob = out + blk * m.rows * f;
    for (std::size_t r = 0; r < m.rows; ++r) {
      double* orow = ob + r * f;
      for (auto e = m.row_ptr[r]; e < m.row_ptr[r + 1]; ++e) {
        const double v = m.values[e];
        const double* xrow = xb + m.col_idx[e] * f;
        for (std::size_t j = 0; j < f; ++j) orow[j] += v * xrow[j];
      }
    }
  }
}

}  // namespace

Tensor sparse_matmul(std::shared_ptr<const SparseOperator> op, const Tensor& x) {
  require_rank("sparse_matmul", x, 2);
  const auto& m = op->matrix;
  if (m.cols == 0 || x.dim(0) % m.cols != 0) {
    throw DimensionError("sparse_matmul: operator " + std::to_string(m.rows) + "x" + std::to_string(m.cols) +
                         " cannot act on shape " + shape_string(x.shape()));
  }
  const auto batch = x.dim(0) / m.cols;
  const auto f = x.dim(1);
  Buffer out(batch * m.rows * f, 0.0);
  spmm_accumulate(m, x.values().data(), out.data(), batch, f);
  return make_result({batch * m.rows, f}, std::move(out), {&x}, [op, batch, f](Node& self) {
    if (double* gx = parent_grad(self, 0)) spmm_accumulate(op->transpose, self.grad.data(), gx, batch, f);
  });
}

Tensor sparse_matmul_concat(std::span<const std::shared_ptr<const SparseOperator>> ops, const Tensor& x) {
  require_rank("sparse_matmul_concat", x, 2);
  if (ops.empty()) throw DimensionError("sparse_matmul_concat: no operators");
  const auto rows = ops[0]->matrix.rows, cols = ops[0]->matrix.cols;
  for (const auto& op : ops) {
    if (op->matrix.rows != rows || op->matrix.cols != cols) {
      throw DimensionError("sparse_matmul_concat: operators of different shapes");
    }
  }
  if (cols == 0 || x.dim(0) % cols != 0) {
    throw DimensionError("sparse_matmul_concat: operators " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " cannot act on shape " + shape_string(x.shape()));
  }
  const auto batch = x.dim(0) / cols, f = x.dim(1), parts = ops.size(), width = parts * f;
  Buffer out(batch * rows * width);
  const double* xv = x.values().data();
  for (std::size_t blk = 0; blk < batch; ++blk) {
    for (std::size_t p = 0; p < parts; ++p) {
      const auto& m = ops[p]->matrix;
      for (std::size_t r = 0; r < rows; ++r) {
        double* orow = out.data() + (blk * rows + r) * width + p * f;
        if (m.row_ptr[r] == m.row_ptr[r + 1]) std::fill_n(orow, f, 0.0);
        for (auto e = m.row_ptr[r]; e < m.row_ptr[r + 1]; ++e) {
          axpy_row(orow, m.values[e], xv + (blk * cols + m.col_idx[e]) * f, f, e == m.row_ptr[r]);
        }
      }
    }
  }
  std::vector<std::shared_ptr<const SparseOperator>> held(ops.begin(), ops.end());
  return make_result({batch * rows, width}, std::move(out), {&x},
                     [held = std::move(held), batch, rows, cols, f, width](Node& self) {
                       const auto [gx, fresh] = parent_grad_target(self, 0);
                       if (!gx) return;
                       for (std::size_t blk = 0; blk < batch; ++blk) {
                         for (std::size_t p = 0; p < held.size(); ++p) {
                           const auto& t = held[p]->transpose;
                           const bool first_part = fresh && p == 0;
                           for (std::size_t c = 0; c < cols; ++c) {
                             double* grow = gx + (blk * cols + c) * f;
                             if (first_part && t.row_ptr[c] == t.row_ptr[c + 1]) std::fill_n(grow, f, 0.0);
                             for (auto e = t.row_ptr[c]; e < t.row_ptr[c + 1]; ++e) {
                               const double* src = self.grad.data() + (blk * rows + t.col_idx[e]) * width + p * f;
                               axpy_row(grow, t.values[e], src, f, first_part && e == t.row_ptr[c]);
                             }
                           }
                         }
                       }
                     });
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise("add", Arith::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise("sub", Arith::Sub, a, b); }
Tensor multiply(const Tensor& a, const Tensor& b) { return elementwise("multiply", Arith::Mul, a, b); }

Tensor scale(const Tensor& x, double factor) {
  Buffer out(x.values().begin(), x.values().end());
  for (auto& v : out) v *= factor;
  return make_result(x.shape(), std::move(out), {&x}, [factor](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += factor * self.grad[i];
    }
  });
}

Tensor add_scalar(const Tensor& x, double value) {
  Buffer out(x.values().begin(), x.values().end());
  for (auto& v : out) v += value;
  return make_result(x.shape(), std::move(out), {&x}, [](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor relu(const Tensor& x) {
  Buffer out(x.values().begin(), x.values().end());
  for (auto& v : out) v = v > 0.0 ? v : 0.0;
  return make_result(x.shape(), std::move(out), {&x}, [](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        g[i] += self.value[i] > 0.0 ? self.grad[i] : 0.0;
      }
    }
  });
}

Tensor tanh(const Tensor& x) {
  Buffer out(x.numel());
  // 1 - 2 / (e^2x + 1) vectorizes; libm tanh is an order of magnitude slower.
  Eigen::Map<const Eigen::ArrayXd> in(x.values().data(), static_cast<Eigen::Index>(x.numel()));
  Eigen::Map<Eigen::ArrayXd>(out.data(), static_cast<Eigen::Index>(out.size())) =
      1.0 - 2.0 / ((2.0 * in).exp() + 1.0);
  return make_result(x.shape(), std::move(out), {&x}, [](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const double y = self.value[i];
        g[i] += (1.0 - y * y) * self.grad[i];
      }
    }
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  require_axis("softmax", x, axis);
  const auto s = split_axis(x.shape(), axis);
  auto xv = x.values();
  Buffer out(xv.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const auto base = o * s.n * s.inner + in;
      double mx = xv[base];
      for (std::size_t k = 1; k < s.n; ++k) mx = std::max(mx, xv[base + k * s.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < s.n; ++k) z += out[base + k * s.inner] = std::exp(xv[base + k * s.inner] - mx);
      for (std::size_t k = 0; k < s.n; ++k) out[base + k * s.inner] /= z;
    }
  }
  return make_result(x.shape(), std::move(out), {&x}, [s](Node& self) {
    double* g = parent_grad(self, 0);
    if (!g) return;
    const auto& y = self.value;
    const auto& dy = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const auto base = o * s.n * s.inner + in;
        double dot = 0.0;
        for (std::size_t k = 0; k < s.n; ++k) dot += dy[base + k * s.inner] * y[base + k * s.inner];
        for (std::size_t k = 0; k < s.n; ++k) {
          const auto i = base + k * s.inner;
          g[i] += y[i] * (dy[i] - dot);
        }
      }
    }
  });
}

namespace {

Tensor reduce_axis(const char* name, const Tensor& x, std::size_t axis, bool keepdim, double factor) {
  require_axis(name, x, axis);
  const auto s = split_axis(x.shape(), axis);
  Shape shape = x.shape();
  if (keepdim) {
    shape[axis] = 1;
  } else {
    shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  auto xv = x.values();
  Buffer out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t k = 0; k < s.n; ++k) {
      const double* row = xv.data() + (o * s.n + k) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t in = 0; in < s.inner; ++in) dst[in] += row[in];
    }
  }
  if (factor != 1.0) {
    for (auto& v : out) v *= factor;
  }
  return make_result(std::move(shape), std::move(out), {&x}, [s, factor](Node& self) {
    double* g = parent_grad(self, 0);
    if (!g) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      const double* src = self.grad.data() + o * s.inner;
      for (std::size_t k = 0; k < s.n; ++k) {
        double* row = g + (o * s.n + k) * s.inner;
        for (std::size_t in = 0; in < s.inner; ++in) row[in] += factor * src[in];
      }
    }
  });
}

}  // namespace

Tensor sum(const Tensor& x, std::size_t axis, bool keepdim) { return reduce_axis("sum", x, axis, keepdim, 1.0); }

Tensor mean(const Tensor& x, std::size_t axis, bool keepdim) {
  require_axis("mean", x, axis);
  return reduce_axis("mean", x, axis, keepdim, 1.0 / static_cast<double>(x.dim(axis)));
}

Tensor sum_all(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  return make_result({}, {total}, {&x}, [](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      const auto n = self.parents[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  Buffer out(x.values().begin(), x.values().end());
  return make_result(std::move(shape), std::move(out), {&x}, [](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const auto rows = parts[0].rank() == 2 ? parts[0].dim(0) : 0;
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank("concat_cols", p, 2);
    if (p.dim(0) != rows) mismatch("concat_cols", parts[0], p);
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  Buffer out(rows * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto v = parts[k].values();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.data() + r * widths[k], widths[k], out.data() + r * total + offset);
    }
    offset += widths[k];
  }
  auto node = std::make_shared<Node>();
  node->shape = {rows, total};
  node->value = std::move(out);
  bool needs = false;
  if (grad_enabled()) {
    for (const auto& p : parts) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const auto& p : parts) node->parents.push_back(p.node());
    node->backward = [rows, total, widths](Node& self) {
      std::size_t off = 0;
      for (std::size_t k = 0; k < widths.size(); ++k) {
        if (double* g = parent_grad(self, k)) {
          for (std::size_t r = 0; r < rows; ++r) {
            const double* src = self.grad.data() + r * total + off;
            for (std::size_t j = 0; j < widths[k]; ++j) g[r * widths[k] + j] += src[j];
          }
        }
        off += widths[k];
      }
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor row_cosine(const Tensor& z, const Tensor& w) {
  require_rank("row_cosine", z, 2);
  if (w.numel() != z.dim(1)) mismatch("row_cosine", z, w);
  const auto n = z.dim(0), h = z.dim(1);
  auto zv = z.values();
  auto wv = w.values();
  double wn = 0.0;
  for (double v : wv) wn += v * v;
  wn = std::sqrt(wn);
  Buffer out(n, 0.0);
  std::vector<double> znorm(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    double dot = 0.0, zz = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
      dot += zv[r * h + j] * wv[j];
      zz += zv[r * h + j] * zv[r * h + j];
    }
    znorm[r] = std::sqrt(zz);
    if (znorm[r] > 0.0 && wn > 0.0) out[r] = dot / (znorm[r] * wn);
  }
  auto norms = std::make_shared<std::vector<double>>(std::move(znorm));
  return make_result({n, 1}, std::move(out), {&z, &w}, [n, h, wn, norms](Node& self) {
    const auto& zv = self.parents[0]->value;
    const auto& wv = self.parents[1]->value;
    double* gz = parent_grad(self, 0);
    double* gw = parent_grad(self, 1);
    for (std::size_t r = 0; r < n; ++r) {
      const double zr = (*norms)[r];
      if (!(zr > 0.0 && wn > 0.0)) continue;
      const double s = self.value[r];
      const double g = self.grad[r];
      for (std::size_t j = 0; j < h; ++j) {
        const double zj = zv[r * h + j], wj = wv[j];
        if (gz) gz[r * h + j] += g * (wj / (zr * wn) - s * zj / (zr * zr));
        if (gw) gw[j] += g * (zj / (zr * wn) - s * wj / (wn * wn));
      }
    }
  });
}

namespace {

// Row-order passes over [rows, c] data; the restrict-qualified pointers let
// the per-channel accumulators vectorize.
void column_sums(const double* __restrict x, std::size_t rows, std::size_t c, double* __restrict acc) {
  std::fill_n(acc, c, 0.0);
  for (std::size_t r = 0; r < rows; ++r, x += c) {
    for (std::size_t j = 0; j < c; ++j) acc[j] += x[j];
  }
}

// Per-channel normalization shared by batch_norm and batch_norm_relu. Fills
// xhat and inv_std and returns gamma * xhat + beta.
Buffer normalize_channels(const char* name, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                                       BatchNormStats& stats, bool training, std::vector<double>& xhat,
                                       std::vector<double>& inv_std) {
  require_rank(name, x, 2);
  const auto rows = x.dim(0), c = x.dim(1);
  if (gamma.numel() != c) mismatch(name, x, gamma);
  if (beta.numel() != c) mismatch(name, x, beta);
  if (stats.running_mean.size() != c || stats.running_var.size() != c) {
    throw DimensionError(std::string(name) + ": running statistics sized " +
                         std::to_string(stats.running_mean.size()) + " for " + std::to_string(c) + " channels");
  }
  if (training && rows < 2) throw DimensionError(std::string(name) + ": training needs at least two rows");
  const double* __restrict xv = x.values().data();
  xhat.resize(rows * c);
  double* __restrict xh = xhat.data();
  std::vector<double> mu(c), var(c);
  if (training) {
    column_sums(xv, rows, c, mu.data());
    for (auto& m : mu) m /= static_cast<double>(rows);
  } else {
    mu = stats.running_mean;
  }
  const double* __restrict mp = mu.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < c; ++j) xh[r * c + j] = xv[r * c + j] - mp[j];
  }
  if (training) {
    double* __restrict vp = var.data();
    std::fill_n(vp, c, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < c; ++j) vp[j] += xh[r * c + j] * xh[r * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) {
      var[j] /= static_cast<double>(rows);
      stats.running_mean[j] = stats.momentum * stats.running_mean[j] + (1.0 - stats.momentum) * mu[j];
      stats.running_var[j] = stats.momentum * stats.running_var[j] + (1.0 - stats.momentum) * var[j];
    }
  } else {
    var = stats.running_var;
  }
  inv_std.resize(c);
  for (std::size_t j = 0; j < c; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + stats.eps);
  Buffer out(rows * c);
  double* __restrict op = out.data();
  const double* __restrict is = inv_std.data();
  const double* __restrict gv = gamma.values().data();
  const double* __restrict bv = beta.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < c; ++j) {
      const auto i = r * c + j;
      xh[i] *= is[j];
      op[i] = gv[j] * xh[i] + bv[j];
    }
  }
  return out;
}

// Backward through gamma * xhat + beta given dy; `gate` (optional) scales dy
// elementwise first.
void normalize_backward(Node& self, std::size_t rows, std::size_t c, bool training, const std::vector<double>& xhat,
                        const std::vector<double>& inv_std, const std::vector<double>* gate) {
  const auto n = rows * c;
  std::vector<double> gated;
  const double* __restrict dy = self.grad.data();
  if (gate) {
    gated.resize(n);
    const double* __restrict gt = gate->data();
    double* __restrict gd = gated.data();
    for (std::size_t i = 0; i < n; ++i) gd[i] = dy[i] * gt[i];
    dy = gated.data();
  }
  const double* __restrict xh = xhat.data();
  std::vector<double> sum_dy(c), sum_dy_xhat(c, 0.0);
  column_sums(dy, rows, c, sum_dy.data());
  double* __restrict sdx = sum_dy_xhat.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < c; ++j) sdx[j] += dy[r * c + j] * xh[r * c + j];
  }
  if (double* gg = parent_grad(self, 1)) {
    for (std::size_t j = 0; j < c; ++j) gg[j] += sum_dy_xhat[j];
  }
  if (double* gb = parent_grad(self, 2)) {
    for (std::size_t j = 0; j < c; ++j) gb[j] += sum_dy[j];
  }
  double* __restrict gx = parent_grad(self, 0);
  if (!gx) return;
  const auto& gv = self.parents[1]->value;
  const double inv_rows = 1.0 / static_cast<double>(rows);
  std::vector<double> k(c), mean_dy(c), mean_dy_xhat(c);
  for (std::size_t j = 0; j < c; ++j) {
    k[j] = gv[j] * inv_std[j];
    mean_dy[j] = training ? inv_rows * sum_dy[j] : 0.0;
    mean_dy_xhat[j] = training ? inv_rows * sum_dy_xhat[j] : 0.0;
  }
  const double* __restrict kp = k.data();
  const double* __restrict md = mean_dy.data();
  const double* __restrict mdx = mean_dy_xhat.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < c; ++j) {
      const auto i = r * c + j;
      gx[i] += kp[j] * (dy[i] - md[j] - xh[i] * mdx[j]);
    }
  }
}

}  // namespace

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats,
                  bool training) {
  auto xhat = std::make_shared<std::vector<double>>();
  auto inv_std = std::make_shared<std::vector<double>>();
  auto out = normalize_channels("batch_norm", x, gamma, beta, stats, training, *xhat, *inv_std);
  const auto rows = x.dim(0), c = x.dim(1);
  return make_result({rows, c}, std::move(out), {&x, &gamma, &beta}, [=](Node& self) {
    normalize_backward(self, rows, c, training, *xhat, *inv_std, nullptr);
  });
}

Tensor batch_norm_relu(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats,
                       double dropout_rate, RngStream& rng, bool training) {
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ParameterError("dropout rate must lie in [0, 1)");
  const char* name = "batch_norm_relu";
  require_rank(name, x, 2);
  const auto rows = x.dim(0), c = x.dim(1), n = rows * c;
  if (gamma.numel() != c) mismatch(name, x, gamma);
  if (beta.numel() != c) mismatch(name, x, beta);
  if (stats.running_mean.size() != c || stats.running_var.size() != c) {
    throw DimensionError(std::string(name) + ": running statistics sized " +
                         std::to_string(stats.running_mean.size()) + " for " + std::to_string(c) + " channels");
  }
  if (training && rows < 2) throw DimensionError(std::string(name) + ": training needs at least two rows");

  // Memory traffic dominates here, so the statistics take two read passes and
  // the output one; xhat is recomputed from x in the backward pass.
  const double* __restrict xv = x.values().data();
  auto mu = std::make_shared<std::vector<double>>(c);
  auto inv_std = std::make_shared<std::vector<double>>(c);
  if (training) {
    double* __restrict mp = mu->data();
    column_sums(xv, rows, c, mp);
    for (std::size_t j = 0; j < c; ++j) mp[j] /= static_cast<double>(rows);
    std::vector<double> var(c, 0.0);
    double* __restrict vp = var.data();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* __restrict xr = xv + r * c;
      for (std::size_t j = 0; j < c; ++j) {
        const double d = xr[j] - mp[j];
        vp[j] += d * d;
      }
    }
    for (std::size_t j = 0; j < c; ++j) {
      var[j] /= static_cast<double>(rows);
      stats.running_mean[j] = stats.momentum * stats.running_mean[j] + (1.0 - stats.momentum) * mp[j];
      stats.running_var[j] = stats.momentum * stats.running_var[j] + (1.0 - stats.momentum) * var[j];
      (*inv_std)[j] = 1.0 / std::sqrt(var[j] + stats.eps);
    }
  } else {
    *mu = stats.running_mean;
    for (std::size_t j = 0; j < c; ++j) (*inv_std)[j] = 1.0 / std::sqrt(stats.running_var[j] + stats.eps);
  }

  // gate = dropout scale where the ReLU passes, 0 elsewhere.
  auto gate = std::make_shared<Buffer>(n);
  Buffer out(n);
  double* __restrict gt = gate->data();
  double* __restrict op = out.data();
  const double* __restrict mp = mu->data();
  const double* __restrict is = inv_std->data();
  const double* __restrict gv = gamma.values().data();
  const double* __restrict bv = beta.values().data();
  const bool drop = training && dropout_rate > 0.0;
  const auto threshold = static_cast<std::uint64_t>(std::llround(dropout_rate * 65536.0));
  const double table[2] = {0.0, drop ? 1.0 / (1.0 - dropout_rate) : 1.0};
  if (drop) {
    for (std::size_t i = 0; i < n; i += 4) {
      const std::uint64_t bits = rng.next_u64();
      for (std::size_t k = 0; k < 4 && i + k < n; ++k) gt[i + k] = table[((bits >> (16 * k)) & 0xFFFF) >= threshold];
    }
  } else {
    std::fill_n(gt, n, 1.0);
  }
  // Indexing through per-row pointers and masking by multiplication keeps
  // these loops vectorizable.
  for (std::size_t r = 0; r < rows; ++r) {
    const double* __restrict xr = xv + r * c;
    double* __restrict gr = gt + r * c;
    double* __restrict orow = op + r * c;
    for (std::size_t j = 0; j < c; ++j) {
      const double v = (gv[j] * (xr[j] - mp[j]) * is[j] + bv[j]) * gr[j];
      const double pos = static_cast<double>(v > 0.0);
      gr[j] *= pos;
      orow[j] = v * pos;
    }
  }
  return make_result({rows, c}, std::move(out), {&x, &gamma, &beta}, [=](Node& self) {
    const double* __restrict dy = self.grad.data();
    const double* __restrict xv = self.parents[0]->value.data();
    const double* __restrict gt = gate->data();
    const double* __restrict mp = mu->data();
    const double* __restrict is = inv_std->data();
    std::vector<double> sum_d(c, 0.0), sum_dx(c, 0.0);
    double* __restrict sd = sum_d.data();
    double* __restrict sdx = sum_dx.data();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* __restrict dr = dy + r * c;
      const double* __restrict xr = xv + r * c;
      const double* __restrict gr = gt + r * c;
      for (std::size_t j = 0; j < c; ++j) {
        const double d = dr[j] * gr[j];
        sd[j] += d;
        sdx[j] += d * (xr[j] - mp[j]) * is[j];
      }
    }
    if (double* gg = parent_grad(self, 1)) {
      for (std::size_t j = 0; j < c; ++j) gg[j] += sdx[j];
    }
    if (double* gb = parent_grad(self, 2)) {
      for (std::size_t j = 0; j < c; ++j) gb[j] += sd[j];
    }
    const auto [gx, fresh] = parent_grad_target(self, 0);
    if (!gx) return;
    const auto& gvals = self.parents[1]->value;
    const double inv_rows = 1.0 / static_cast<double>(rows);
    std::vector<double> k(c), md(c), mdx(c);
    for (std::size_t j = 0; j < c; ++j) {
      k[j] = gvals[j] * is[j];
      md[j] = training ? inv_rows * sd[j] : 0.0;
      mdx[j] = training ? inv_rows * sdx[j] : 0.0;
    }
    const double* __restrict kp = k.data();
    const double* __restrict mdp = md.data();
    const double* __restrict mdxp = mdx.data();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* __restrict dr = dy + r * c;
      const double* __restrict xr = xv + r * c;
      const double* __restrict gr = gt + r * c;
      double* __restrict gxr = gx + r * c;
      for (std::size_t j = 0; j < c; ++j) {
        const double xh = (xr[j] - mp[j]) * is[j];
        const double d = kp[j] * (dr[j] * gr[j] - mdp[j] - xh * mdxp[j]);
        gxr[j] = fresh ? d : gxr[j] + d;
      }
    }
  });
}

Tensor weighted_pool(const Tensor& x, const Tensor& w) {
  if (x.rank() != 2 || w.rank() != 3 || x.dim(0) != w.numel()) mismatch("weighted_pool", x, w);
  const auto a = w.dim(0), n = w.dim(1), m = w.dim(2), f = x.dim(1);
  auto xv = x.values();
  auto wv = w.values();
  Buffer out(a * m * f, 0.0);
  for (std::size_t i = 0; i < a; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t j = 0; j < m; ++j) {
        const double wt = wv[(i * n + k) * m + j];
        const double* src = xv.data() + ((i * n + k) * m + j) * f;
        double* dst = out.data() + (i * m + j) * f;
        for (std::size_t c = 0; c < f; ++c) dst[c] += wt * src[c];
      }
    }
  }
  return make_result({a, m, f}, std::move(out), {&x, &w}, [a, n, m, f](Node& self) {
    const auto& xv = self.parents[0]->value;
    const auto& wv = self.parents[1]->value;
    const auto [gx, fresh] = parent_grad_target(self, 0);
    double* gw = parent_grad(self, 1);
    for (std::size_t i = 0; i < a; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < m; ++j) {
          const auto wi = (i * n + k) * m + j;
          const double* g = self.grad.data() + (i * m + j) * f;
          const double* src = xv.data() + wi * f;
          if (gx) axpy_row(gx + wi * f, wv[wi], g, f, fresh);
          if (gw) {
            double dot = 0.0;
            for (std::size_t c = 0; c < f; ++c) dot += g[c] * src[c];
            gw[wi] += dot;
          }
        }
      }
    }
  });
}

Tensor dropout(const Tensor& x, double rate, RngStream& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ParameterError("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  // Each 64-bit draw yields four 16-bit uniforms; the rate resolves to 1/65536.
  const auto threshold = static_cast<std::uint64_t>(std::llround(rate * 65536.0));
  const double keep_scale = 1.0 / (1.0 - rate);
  const auto n = x.numel();
  auto mask = std::make_shared<std::vector<double>>(n);
  Buffer out(n);
  auto xv = x.values();
  const double table[2] = {0.0, keep_scale};
  double* mk = mask->data();
  for (std::size_t i = 0; i < n; i += 4) {
    const std::uint64_t bits = rng.next_u64();
    for (std::size_t k = 0; k < 4 && i + k < n; ++k) {
      const double m = table[((bits >> (16 * k)) & 0xFFFF) >= threshold];
      mk[i + k] = m;
      out[i + k] = xv[i + k] * m;
    }
  }
  return make_result(x.shape(), std::move(out), {&x}, [mask](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += (*mask)[i] * self.grad[i];
    }
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels) {
  require_rank("cross_entropy", logits, 2);
  const auto b = logits.dim(0), c = logits.dim(1);
  if (labels.size() != b) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                         shape_string(logits.shape()));
  }
  auto lv = logits.values();
  auto probs = std::make_shared<std::vector<double>>(b * c);
  double loss = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    if (labels[r] >= c) throw DimensionError("cross_entropy: label out of range");
    const double* row = lv.data() + r * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) (*probs)[r * c + j] = std::exp(row[j] - log_z);
    loss += log_z - row[labels[r]];
  }
  loss /= static_cast<double>(b);
  std::vector<std::size_t> y(labels.begin(), labels.end());
  return make_result({}, {loss}, {&logits}, [probs, y = std::move(y), b, c](Node& self) {
    double* g = parent_grad(self, 0);
    if (!g) return;
    const double s = self.grad[0] / static_cast<double>(b);
    for (std::size_t r = 0; r < b; ++r) {
      for (std::size_t j = 0; j < c; ++j) {
        g[r * c + j] += s * ((*probs)[r * c + j] - (j == y[r] ? 1.0 : 0.0));
      }
    }
  });
}

}  // namespace faigcn::nn
