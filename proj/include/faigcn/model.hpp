// SPDX-License-Identifier: Apache-2.0
#pragma once

// The frequency-attention GCN: two graph-convolution layers over the
// pose-frequency graph, a per-joint softmax attention over frequency bins
// that pools each joint to one vector, an average over joints, and a linear
// classifier.

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faigcn/graph.hpp"
#include "faigcn/nn/checkpoint.hpp"
#include "faigcn/nn/ops.hpp"
#include "faigcn/nn/rng.hpp"
#include "faigcn/nn/tensor.hpp"
#include "faigcn/spectral.hpp"

namespace faigcn::model {

using nn::Tensor;

/// Score functions: Cosine is 1 + cos(w_alpha, z), DotProduct is w_alpha . z.
enum class AttentionVariant : std::uint8_t { Cosine = 1, DotProduct = 2 };

AttentionVariant attention_variant_from_int(int n);

struct FaigcnConfig {
  std::vector<std::size_t> channels{32, 64};
  std::vector<std::size_t> strides{1, 2};
  graph::PartitionStrategy partition = graph::PartitionStrategy::Spatial;
  double dropout = 0.5;
  AttentionVariant variant = AttentionVariant::DotProduct;
  std::size_t attention_hidden = 32;
  std::size_t num_classes = 2;
  /// false replaces the learned attention by a uniform average over bins.
  bool use_attention = true;
  /// false drops the chain edges across bins.
  bool inter_frequency = true;

  void validate() const;
  std::size_t num_partitions() const;
};

struct LayerParams {
  Tensor weight;  ///< [partitions, in_ch, out_ch]
  Tensor gamma;   ///< [out_ch]
  Tensor beta;    ///< [out_ch]
  nn::BatchNormStats bn;
};

struct FaigcnParams {
  std::size_t num_bins = 0;  ///< input bin count B
  std::vector<LayerParams> layers;
  Tensor w_z;      ///< [hidden, F]
  Tensor w_alpha;  ///< [hidden]
  Tensor fc_w;     ///< [classes, F]
  Tensor fc_b;     ///< [classes]

  /// Every learnable tensor, in a fixed order.
  std::vector<Tensor> trainable() const;
  /// Deep copy (the default copy shares storage).
  FaigcnParams clone() const;
};

/// Uniform(-a, a) with a = sqrt(6 / fan_in) for every weight; batch-norm scale
/// 1 and shift 0; classifier bias 0. Throws ParameterError when num_bins < 2.
FaigcnParams init_params(const FaigcnConfig& config, std::size_t num_bins, nn::RngStream& rng);

/// Propagation operators of one layer: one sparse matrix per partition, each
/// mapping in_bins*18 nodes to the out_bins*18 nodes kept by the stride.
struct LayerTopology {
  std::size_t in_bins = 0;
  std::size_t out_bins = 0;
  std::size_t stride = 1;
  std::vector<std::shared_ptr<const nn::SparseOperator>> operators;
};

/// Immutable and shareable between threads.
struct Topology {
  std::size_t num_bins = 0;
  std::vector<LayerTopology> layers;

  std::size_t output_bins() const { return layers.empty() ? num_bins : layers.back().out_bins; }
};

/// A stride s keeps bins 0, s, 2s, ...; the output therefore has ceil(B/s) bins.
Topology build_topology(const FaigcnConfig& config, std::size_t num_bins);

/// Rows of `normalized` (one matrix per partition) restricted to the nodes of
/// every `stride`-th bin.
std::vector<std::shared_ptr<const nn::SparseOperator>> strided_operators(
    const graph::NormalizedAdjacency& normalized, std::size_t num_bins, std::size_t stride);

/// x [batch*in_nodes, in_ch] -> ReLU(dropout(BN(sum_p A_p x W_p))) of shape
/// [batch*out_nodes, out_ch].
Tensor gcn_layer(const Tensor& x, const LayerTopology& topo, LayerParams& params, double dropout,
                 nn::RngStream& rng, bool training);

/// h [batch*bins*18, F] -> alpha [batch, bins, 18], a softmax over bins for
/// every joint. Under the cosine score a zero-norm z or w_alpha gives score 1.
Tensor attention(const Tensor& h, std::size_t bins, const Tensor& w_z, const Tensor& w_alpha,
                 AttentionVariant variant);

/// v[batch, i] = sum_b alpha[batch, b, i] * h[batch, b, i]; returns [batch, 18, F].
Tensor attention_pool(const Tensor& h, const Tensor& alpha);

struct ForwardResult {
  Tensor logits;         ///< [batch, classes]
  Tensor alpha;          ///< [batch, out_bins, 18]
  Tensor pre_attention;  ///< [batch*out_bins*18, F]
};

/// Input tensor [batch*B*18, 2] built from feature tensors of equal B.
Tensor make_input(std::span<const spectral::SpectralFeatures* const> batch);

ForwardResult forward(const Tensor& input, const Topology& topo, FaigcnParams& params, const FaigcnConfig& config,
                      nn::RngStream& rng, bool training);

/// Convenience: one sample, evaluation mode, no gradient history.
ForwardResult evaluate(const spectral::SpectralFeatures& features, const Topology& topo, FaigcnParams& params,
                       const FaigcnConfig& config);

struct AttentionMap {
  std::size_t num_bins = 0;                 ///< B' (after the stride)
  std::vector<double> alpha;                ///< row-major [bin][joint]
  std::array<double, kNumJoints> per_joint{};  ///< peak alpha over bins, rescaled to sum 1

  double at(std::size_t bin, std::size_t joint) const { return alpha[bin * kNumJoints + joint]; }
};

/// Map of one batch entry of an alpha tensor [batch, bins, 18].
AttentionMap attention_map(const Tensor& alpha, std::size_t batch_index = 0);

/// Per-joint summary of alpha: the largest weight over bins for each joint,
/// rescaled to sum 1.
std::array<double, kNumJoints> per_joint_summary(std::span<const double> alpha, std::size_t num_bins);

nn::Checkpoint to_checkpoint(const FaigcnParams& params, const FaigcnConfig& config);
/// Restores parameters and checks that the stored configuration matches.
FaigcnParams from_checkpoint(const nn::Checkpoint& ckpt, const FaigcnConfig& config);

}  // namespace faigcn::model
