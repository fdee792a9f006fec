// SPDX-License-Identifier: Apache-2.0
#include "faigcn/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "faigcn/error.hpp"
#include "faigcn/format.hpp"

namespace faigcn::model {

AttentionVariant attention_variant_from_int(int n) {
  if (n == 1) return AttentionVariant::Cosine;
  if (n == 2) return AttentionVariant::DotProduct;
  throw ParameterError("attention variant must be 1 or 2, got " + std::to_string(n));
}

void FaigcnConfig::validate() const {
  if (channels.empty()) throw ParameterError("model needs at least one GCN layer");
  if (channels.size() != strides.size()) {
    throw ParameterError("channels and strides must have one entry per layer");
  }
  for (auto c : channels) {
    if (c == 0) throw ParameterError("layer width must be positive");
  }
  for (auto s : strides) {
    if (s == 0) throw ParameterError("stride must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ParameterError("dropout rate must lie in [0, 1)");
  if (attention_hidden == 0) throw ParameterError("attention hidden size must be positive");
  if (num_classes < 2) throw ParameterError("need at least two classes");
  if (variant != AttentionVariant::Cosine && variant != AttentionVariant::DotProduct) {
    throw ParameterError("unknown attention variant");
  }
}

std::size_t FaigcnConfig::num_partitions() const {
  switch (partition) {
    case graph::PartitionStrategy::Uniform: return 1;
    case graph::PartitionStrategy::Distance: return 2;
    case graph::PartitionStrategy::Spatial: return 3;
  }
  return 3;
}

std::vector<Tensor> FaigcnParams::trainable() const {
  std::vector<Tensor> out;
  for (const auto& l : layers) {
    out.push_back(l.weight);
    out.push_back(l.gamma);
    out.push_back(l.beta);
  }
  out.push_back(w_z);
  out.push_back(w_alpha);
  out.push_back(fc_w);
  out.push_back(fc_b);
  return out;
}

namespace {

Tensor copy_param(const Tensor& t) {
  return Tensor(t.shape(), std::vector<double>(t.values().begin(), t.values().end()), true);
}

Tensor uniform_param(nn::Shape shape, std::size_t fan_in, nn::RngStream& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<double> v(nn::shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-a, a);
  return Tensor(std::move(shape), std::move(v), true);
}

}  // namespace

FaigcnParams FaigcnParams::clone() const {
  FaigcnParams p;
  p.num_bins = num_bins;
  for (const auto& l : layers) {
    p.layers.push_back({copy_param(l.weight), copy_param(l.gamma), copy_param(l.beta), l.bn});
  }
  p.w_z = copy_param(w_z);
  p.w_alpha = copy_param(w_alpha);
  p.fc_w = copy_param(fc_w);
  p.fc_b = copy_param(fc_b);
  return p;
}

FaigcnParams init_params(const FaigcnConfig& config, std::size_t num_bins, nn::RngStream& rng) {
  config.validate();
  if (num_bins < 2) throw ParameterError("model needs at least two frequency bins");
  FaigcnParams p;
  p.num_bins = num_bins;
  const auto parts = config.num_partitions();
  std::size_t in_ch = spectral::kNumChannels;
  for (auto out_ch : config.channels) {
    LayerParams l;
    l.weight = uniform_param({parts, in_ch, out_ch}, in_ch, rng);
    l.gamma = Tensor::filled({out_ch}, 1.0, true);
    l.beta = Tensor::zeros({out_ch}, true);
    l.bn = nn::BatchNormStats(out_ch);
    p.layers.push_back(std::move(l));
    in_ch = out_ch;
  }
  const auto f = in_ch, h = config.attention_hidden;
  p.w_z = uniform_param({h, f}, f, rng);
  p.w_alpha = uniform_param({h}, h, rng);
  p.fc_w = uniform_param({config.num_classes, f}, f, rng);
  p.fc_b = Tensor::zeros({config.num_classes}, true);
  return p;
}

std::vector<std::shared_ptr<const nn::SparseOperator>> strided_operators(
    const graph::NormalizedAdjacency& normalized, std::size_t num_bins, std::size_t stride) {
  std::vector<std::size_t> keep;
  for (std::size_t b = 0; b < num_bins; b += stride) {
    for (std::size_t i = 0; i < kNumJoints; ++i) keep.push_back(b * kNumJoints + i);
  }
  std::vector<std::shared_ptr<const nn::SparseOperator>> ops;
  for (const auto& m : normalized.partitions) {
    ops.push_back(std::make_shared<const nn::SparseOperator>(stride == 1 ? m : m.select_rows(keep)));
  }
  return ops;
}

Topology build_topology(const FaigcnConfig& config, std::size_t num_bins) {
  config.validate();
  if (num_bins < 1) throw ParameterError("topology needs at least one bin");
  Topology topo;
  topo.num_bins = num_bins;
  std::size_t bins = num_bins;
  for (auto stride : config.strides) {
    const auto g = graph::build_graph(bins, config.inter_frequency);
    const auto labels = graph::partition(g, config.partition);
    const auto norm = graph::normalize_adjacency(g, labels);
    LayerTopology lt;
    lt.in_bins = bins;
    lt.stride = stride;
    lt.out_bins = (bins + stride - 1) / stride;
    lt.operators = strided_operators(norm, bins, stride);
    topo.layers.push_back(std::move(lt));
    bins = topo.layers.back().out_bins;
  }
  return topo;
}

Tensor gcn_layer(const Tensor& x, const LayerTopology& topo, LayerParams& params, double dropout,
                 nn::RngStream& rng, bool training) {
  const auto parts = topo.operators.size();
  if (params.weight.rank() != 3 || params.weight.dim(0) != parts || params.weight.dim(1) != x.dim(1)) {
    throw DimensionError("gcn_layer: weight " + nn::shape_string(params.weight.shape()) + " does not fit input " +
                         nn::shape_string(x.shape()) + " with " + std::to_string(parts) + " partitions");
  }
  if (x.dim(0) % (topo.in_bins * kNumJoints) != 0) {
    throw DimensionError("gcn_layer: input " + nn::shape_string(x.shape()) + " is not a whole number of " +
                         std::to_string(topo.in_bins) + "-bin graphs");
  }
  Tensor stacked = nn::sparse_matmul_concat(topo.operators, x);
  const auto in_ch = params.weight.dim(1), out_ch = params.weight.dim(2);
  Tensor y = nn::matmul(stacked, nn::reshape(params.weight, {parts * in_ch, out_ch}));
  return nn::batch_norm_relu(y, params.gamma, params.beta, params.bn, dropout, rng, training);
}

Tensor attention(const Tensor& h, std::size_t bins, const Tensor& w_z, const Tensor& w_alpha,
                 AttentionVariant variant) {
  if (h.rank() != 2 || bins == 0 || h.dim(0) % (bins * kNumJoints) != 0) {
    throw DimensionError("attention: features " + nn::shape_string(h.shape()) + " do not hold " +
                         std::to_string(bins) + "-bin graphs");
  }
  const auto batch = h.dim(0) / (bins * kNumJoints);
  const auto hidden = w_z.dim(0);
  Tensor z = nn::tanh(nn::matmul(h, w_z, true));
  Tensor score = variant == AttentionVariant::DotProduct
                     ? nn::matmul(z, nn::reshape(w_alpha, {hidden, 1}))
                     : nn::add_scalar(nn::row_cosine(z, w_alpha), 1.0);
  return nn::softmax(nn::reshape(score, {batch, bins, kNumJoints}), 1);
}

Tensor attention_pool(const Tensor& h, const Tensor& alpha) {
  if (alpha.rank() != 3 || alpha.dim(2) != kNumJoints || h.rank() != 2 ||
      h.dim(0) != alpha.dim(0) * alpha.dim(1) * kNumJoints) {
    throw DimensionError("attention_pool: features " + nn::shape_string(h.shape()) + " and weights " +
                         nn::shape_string(alpha.shape()) + " disagree");
  }
  return nn::weighted_pool(h, alpha);
}

Tensor make_input(std::span<const spectral::SpectralFeatures* const> batch) {
  if (batch.empty()) throw DimensionError("make_input: empty batch");
  const auto bins = batch[0]->num_bins;
  std::vector<double> values;
  values.reserve(batch.size() * bins * kNumJoints * spectral::kNumChannels);
  for (const auto* f : batch) {
    if (f->num_bins != bins || f->values.size() != bins * kNumJoints * spectral::kNumChannels) {
      throw DimensionError("make_input: feature tensors with different bin counts in one batch");
    }
    values.insert(values.end(), f->values.begin(), f->values.end());
  }
  return Tensor({batch.size() * bins * kNumJoints, spectral::kNumChannels}, std::move(values));
}

ForwardResult forward(const Tensor& input, const Topology& topo, FaigcnParams& params, const FaigcnConfig& config,
                      nn::RngStream& rng, bool training) {
  if (params.layers.size() != topo.layers.size() || params.num_bins != topo.num_bins) {
    throw DimensionError("forward: parameters built for " + std::to_string(params.num_bins) + " bins and " +
                         std::to_string(params.layers.size()) + " layers, topology has " +
                         std::to_string(topo.num_bins) + " bins and " + std::to_string(topo.layers.size()));
  }
  if (input.rank() != 2 || input.dim(1) != spectral::kNumChannels || input.dim(0) == 0 ||
      input.dim(0) % (topo.num_bins * kNumJoints) != 0) {
    throw DimensionError("forward: input " + nn::shape_string(input.shape()) + " does not match " +
                         std::to_string(topo.num_bins) + " bins");
  }
  const auto batch = input.dim(0) / (topo.num_bins * kNumJoints);
  Tensor h = input;
  for (std::size_t l = 0; l < topo.layers.size(); ++l) {
    h = gcn_layer(h, topo.layers[l], params.layers[l], config.dropout, rng, training);
  }
  const auto bins = topo.output_bins();
  ForwardResult r;
  r.pre_attention = h;
  r.alpha = config.use_attention
                ? attention(h, bins, params.w_z, params.w_alpha, config.variant)
                : Tensor::filled({batch, bins, kNumJoints}, 1.0 / static_cast<double>(bins));
  Tensor pooled = attention_pool(h, r.alpha);
  Tensor joint_mean = nn::mean(pooled, 1);
  r.logits = nn::add(nn::matmul(joint_mean, params.fc_w, true), nn::reshape(params.fc_b, {1, config.num_classes}));
  return r;
}

ForwardResult evaluate(const spectral::SpectralFeatures& features, const Topology& topo, FaigcnParams& params,
                       const FaigcnConfig& config) {
  nn::NoGradGuard guard;
  nn::RngStream unused(0);
  const spectral::SpectralFeatures* one[] = {&features};
  return forward(make_input(one), topo, params, config, unused, false);
}

std::array<double, kNumJoints> per_joint_summary(std::span<const double> alpha, std::size_t num_bins) {
  if (alpha.size() != num_bins * kNumJoints) throw DimensionError("per_joint_summary: alpha size mismatch");
  std::array<double, kNumJoints> out{};
  double total = 0.0;
  for (std::size_t i = 0; i < kNumJoints; ++i) {
    double peak = 0.0;
    for (std::size_t b = 0; b < num_bins; ++b) peak = std::max(peak, alpha[b * kNumJoints + i]);
    out[i] = peak;
    total += peak;
  }
  if (total > 0.0) {
    for (auto& v : out) v /= total;
  }
  return out;
}

AttentionMap attention_map(const Tensor& alpha, std::size_t batch_index) {
  if (alpha.rank() != 3 || alpha.dim(2) != kNumJoints || batch_index >= alpha.dim(0)) {
    throw DimensionError("attention_map: alpha " + nn::shape_string(alpha.shape()) + " has no entry " +
                         std::to_string(batch_index));
  }
  AttentionMap m;
  m.num_bins = alpha.dim(1);
  const auto stride = m.num_bins * kNumJoints;
  auto v = alpha.values().subspan(batch_index * stride, stride);
  m.alpha.assign(v.begin(), v.end());
  m.per_joint = per_joint_summary(m.alpha, m.num_bins);
  return m;
}

namespace {

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<std::pair<std::string, std::string>> structure_meta(const FaigcnParams& params,
                                                                const FaigcnConfig& config) {
  return {
      {"model", "faigcn"},
      {"num_bins", std::to_string(params.num_bins)},
      {"channels", join_sizes(config.channels)},
      {"strides", join_sizes(config.strides)},
      {"partition", std::string(graph::partition_strategy_name(config.partition))},
      {"attention_variant", std::to_string(static_cast<int>(config.variant))},
      {"attention_hidden", std::to_string(config.attention_hidden)},
      {"num_classes", std::to_string(config.num_classes)},
      {"use_attention", config.use_attention ? "1" : "0"},
      {"inter_frequency", config.inter_frequency ? "1" : "0"},
  };
}

void add_blob(nn::Checkpoint& c, std::string name, const nn::Shape& shape, std::span<const double> v) {
  c.blobs.push_back({std::move(name), shape, std::vector<double>(v.begin(), v.end())});
}

}  // namespace

nn::Checkpoint to_checkpoint(const FaigcnParams& params, const FaigcnConfig& config) {
  nn::Checkpoint c;
  c.metadata = structure_meta(params, config);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& lp = params.layers[l];
    const auto prefix = "layer" + std::to_string(l) + ".";
    add_blob(c, prefix + "weight", lp.weight.shape(), lp.weight.values());
    add_blob(c, prefix + "bn.gamma", lp.gamma.shape(), lp.gamma.values());
    add_blob(c, prefix + "bn.beta", lp.beta.shape(), lp.beta.values());
    add_blob(c, prefix + "bn.running_mean", {lp.bn.running_mean.size()}, lp.bn.running_mean);
    add_blob(c, prefix + "bn.running_var", {lp.bn.running_var.size()}, lp.bn.running_var);
  }
  add_blob(c, "attention.w_z", params.w_z.shape(), params.w_z.values());
  add_blob(c, "attention.w_alpha", params.w_alpha.shape(), params.w_alpha.values());
  add_blob(c, "classifier.weight", params.fc_w.shape(), params.fc_w.values());
  add_blob(c, "classifier.bias", params.fc_b.shape(), params.fc_b.values());
  return c;
}

FaigcnParams from_checkpoint(const nn::Checkpoint& ckpt, const FaigcnConfig& config) {
  const auto* bins_meta = ckpt.find_meta("num_bins");
  if (!bins_meta) throw FormatError("checkpoint lacks num_bins");
  nn::RngStream rng(0);
  FaigcnParams p = init_params(config, static_cast<std::size_t>(fmt::to_integer(*bins_meta)), rng);
  for (const auto& [key, value] : structure_meta(p, config)) {
    const auto* stored = ckpt.find_meta(key);
    if (!stored || *stored != value) {
      throw FormatError("checkpoint " + key + " is '" + (stored ? *stored : std::string("<missing>")) +
                        "', configuration expects '" + value + "'");
    }
  }
  auto load = [&](const std::string& name, std::span<double> dst, const nn::Shape& shape) {
    const auto* b = ckpt.find_blob(name);
    if (!b) throw FormatError("checkpoint lacks blob '" + name + "'");
    if (b->shape != shape) {
      throw FormatError("checkpoint blob '" + name + "' has shape " + nn::shape_string(b->shape) + ", expected " +
                        nn::shape_string(shape));
    }
    std::copy(b->values.begin(), b->values.end(), dst.begin());
  };
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& lp = p.layers[l];
    const auto prefix = "layer" + std::to_string(l) + ".";
    load(prefix + "weight", lp.weight.mutable_values(), lp.weight.shape());
    load(prefix + "bn.gamma", lp.gamma.mutable_values(), lp.gamma.shape());
    load(prefix + "bn.beta", lp.beta.mutable_values(), lp.beta.shape());
    load(prefix + "bn.running_mean", lp.bn.running_mean, {lp.bn.running_mean.size()});
    load(prefix + "bn.running_var", lp.bn.running_var, {lp.bn.running_var.size()});
  }
  load("attention.w_z", p.w_z.mutable_values(), p.w_z.shape());
  load("attention.w_alpha", p.w_alpha.mutable_values(), p.w_alpha.shape());
  load("classifier.weight", p.fc_w.mutable_values(), p.fc_w.shape());
  load("classifier.bias", p.fc_b.mutable_values(), p.fc_b.shape());
  return p;
}

}  // namespace faigcn::model
