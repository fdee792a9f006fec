// SPDX-License-Identifier: Apache-2.0
#pragma once

// Differentiable operations on Tensor. Shape problems raise DimensionError
// naming both operands.

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "faigcn/nn/rng.hpp"
#include "faigcn/nn/sparse.hpp"
#include "faigcn/nn/tensor.hpp"

namespace faigcn::nn {

/// a [m, k] times b [k, n]; with transpose_b, b is [n, k].
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b = false);

/// x is [batch * cols, F]; each consecutive block of `cols` rows is multiplied
/// by the operator, giving [batch * rows, F].
Tensor sparse_matmul(std::shared_ptr<const SparseOperator> op, const Tensor& x);

/// The products of several equally shaped operators with x, side by side:
/// [batch * rows, ops.size() * F], operator p in columns [p*F, (p+1)*F).
Tensor sparse_matmul_concat(std::span<const std::shared_ptr<const SparseOperator>> ops, const Tensor& x);

// Elementwise with broadcasting: equal rank, each dimension equal or 1.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor multiply(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);

/// Numerically stable softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);

Tensor sum(const Tensor& x, std::size_t axis, bool keepdim = false);
Tensor mean(const Tensor& x, std::size_t axis, bool keepdim = false);
/// Sum of every element, as a scalar.
Tensor sum_all(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);

/// Rank-2 tensors with equal row counts, side by side.
Tensor concat_cols(std::span<const Tensor> parts);

/// Cosine similarity of each row of z [n, H] with w [H], as [n, 1]. A zero
/// norm on either side counts as cosine 0.
Tensor row_cosine(const Tensor& z, const Tensor& w);

/// x [A*N*M, F] (rows ordered a, n, m) and w [A, N, M] -> [A, M, F], the sum
/// over n of w[a,n,m] * x[(a,n,m), :].
Tensor weighted_pool(const Tensor& x, const Tensor& w);

struct BatchNormStats {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.9;  ///< weight kept by the running average
  double eps = 1e-5;

  explicit BatchNormStats(std::size_t channels = 0)
      : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};

/// x [rows, C] normalized per channel over all rows. Training mode uses the
/// biased batch statistics and folds them into `stats`; evaluation mode uses
/// the running values.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats,
                  bool training);

/// relu(dropout(batch_norm(x))) in one pass, drawing the same dropout mask
/// from `rng` as the separate ops would.
Tensor batch_norm_relu(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats,
                       double dropout_rate, RngStream& rng, bool training);

/// Inverted dropout: kept entries scale by 1/(1-rate). Identity when not
/// training or when rate == 0.
Tensor dropout(const Tensor& x, double rate, RngStream& rng, bool training);

/// Mean softmax cross-entropy of logits [batch, classes] against labels.
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels);

}  // namespace faigcn::nn
