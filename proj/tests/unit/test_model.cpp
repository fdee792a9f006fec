// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "faigcn/error.hpp"
#include "faigcn/model.hpp"
#include "faigcn/nn/checkpoint.hpp"
#include "model_checks.hpp"

using namespace faigcn;
using namespace faigcn::model;

TEST_SUITE("model") {
  TEST_CASE("parameter shapes and initialization range") {
    FaigcnConfig cfg;
    nn::RngStream rng(1);
    const auto p = init_params(cfg, 10, rng);
    REQUIRE(p.layers.size() == 2);
    CHECK(p.layers[0].weight.shape() == nn::Shape{3, 2, 32});
    CHECK(p.layers[1].weight.shape() == nn::Shape{3, 32, 64});
    CHECK(p.w_z.shape() == nn::Shape{32, 64});
    CHECK(p.w_alpha.shape() == nn::Shape{32});
    CHECK(p.fc_w.shape() == nn::Shape{2, 64});
    const double bound = std::sqrt(6.0 / 2.0);
    for (double w : p.layers[0].weight.values()) CHECK(std::abs(w) <= bound);
    for (double g : p.layers[1].gamma.values()) CHECK(g == 1.0);
    CHECK(p.trainable().size() == 2 * 3 + 4);
    CHECK_THROWS_AS(init_params(cfg, 1, rng), ParameterError);
    FaigcnConfig bad;
    bad.strides = {1};
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    CHECK_THROWS_AS(attention_variant_from_int(3), ParameterError);
  }

  TEST_CASE("strides keep every s-th bin") {
    FaigcnConfig cfg;
    const auto topo = build_topology(cfg, 7);
    CHECK(topo.layers[0].out_bins == 7);
    CHECK(topo.layers[1].out_bins == 4);
    CHECK(topo.output_bins() == 4);
    CHECK(topo.layers[1].operators[0]->matrix.rows == 4 * 18);
    CHECK(topo.layers[1].operators[0]->matrix.cols == 7 * 18);
  }

  TEST_CASE("reverse-mode gradients match central differences for both scores") {
    CHECK(testing::model_gradient_error(AttentionVariant::DotProduct, 4, 1) < 1e-4);
    CHECK(testing::model_gradient_error(AttentionVariant::Cosine, 4, 2) < 1e-4);
  }

  TEST_CASE("attention columns are probability vectors") {
    const auto r = testing::attention_simplex(20, 3);
    CHECK(r.worst_sum_error <= 1e-9);
    CHECK(r.most_negative >= 0.0);
    CHECK(r.worst_uniform_error <= 1e-9);
  }

  TEST_CASE("attention on features equal across bins is uniform") {
    std::mt19937_64 gen(4);
    const std::size_t bins = 5, f = 6;
    std::vector<double> h(bins * kNumJoints * f);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::size_t j = 0; j < kNumJoints; ++j)
      for (std::size_t c = 0; c < f; ++c) {
        const double v = u(gen);
        for (std::size_t b = 0; b < bins; ++b) h[(b * kNumJoints + j) * f + c] = v;
      }
    nn::RngStream rng(4);
    std::vector<double> wz(3 * f), wa(3);
    for (auto& v : wz) v = rng.uniform(-1, 1);
    for (auto& v : wa) v = rng.uniform(-1, 1);
    for (auto variant : {AttentionVariant::Cosine, AttentionVariant::DotProduct}) {
      const auto a = attention(nn::Tensor({bins * kNumJoints, f}, h), bins, nn::Tensor({3, f}, wz),
                               nn::Tensor({3}, wa), variant);
      for (double v : a.values()) CHECK(v == doctest::Approx(1.0 / bins).epsilon(1e-12));
    }
  }

  TEST_CASE("per-joint summary is the rescaled peak over bins") {
    std::vector<double> alpha(3 * kNumJoints, 0.0);
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      alpha[0 * kNumJoints + j] = 0.2;
      alpha[1 * kNumJoints + j] = 0.3;
      alpha[2 * kNumJoints + j] = 0.5;
    }
    alpha[0 * kNumJoints + 4] = 0.9;
    alpha[1 * kNumJoints + 4] = 0.05;
    alpha[2 * kNumJoints + 4] = 0.05;
    const auto s = per_joint_summary(alpha, 3);
    const double total = 17 * 0.5 + 0.9;
    CHECK(s[4] == doctest::Approx(0.9 / total));
    CHECK(s[0] == doctest::Approx(0.5 / total));
    double sum = 0.0;
    for (double v : s) sum += v;
    CHECK(sum == doctest::Approx(1.0));
  }

  TEST_CASE("uniform pooling variant ignores the attention weights") {
    std::mt19937_64 gen(5);
    FaigcnConfig cfg;
    cfg.use_attention = false;
    nn::RngStream rng(5);
    auto p = init_params(cfg, 6, rng);
    const auto topo = build_topology(cfg, 6);
    const auto out = evaluate(testing::random_features(gen, 6), topo, p, cfg);
    for (double a : out.alpha.values()) CHECK(a == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("batches evaluate each sample independently") {
    std::mt19937_64 gen(6);
    FaigcnConfig cfg;
    nn::RngStream rng(6);
    auto p = init_params(cfg, 6, rng);
    const auto topo = build_topology(cfg, 6);
    const auto a = testing::random_features(gen, 6), b = testing::random_features(gen, 6);
    const spectral::SpectralFeatures* both[] = {&a, &b};
    nn::NoGradGuard guard;
    nn::RngStream unused(0);
    const auto joint = forward(make_input(both), topo, p, cfg, unused, false);
    const auto single = evaluate(b, topo, p, cfg);
    CHECK(joint.logits.values()[2] == doctest::Approx(single.logits.values()[0]).epsilon(1e-12));
    CHECK(joint.logits.values()[3] == doctest::Approx(single.logits.values()[1]).epsilon(1e-12));
    const auto c = testing::random_features(gen, 7);
    const spectral::SpectralFeatures* mixed[] = {&a, &c};
    CHECK_THROWS_AS(make_input(mixed), DimensionError);
  }

  TEST_CASE("checkpoint restore reproduces the outputs") {
    std::mt19937_64 gen(7);
    FaigcnConfig cfg;
    cfg.variant = AttentionVariant::Cosine;
    nn::RngStream rng(7);
    auto p = init_params(cfg, 8, rng);
    p.layers[0].bn.running_mean[3] = 0.25;
    const auto topo = build_topology(cfg, 8);
    const auto f = testing::random_features(gen, 8);
    const auto bytes = nn::serialize_checkpoint(to_checkpoint(p, cfg));
    auto q = from_checkpoint(nn::parse_checkpoint(bytes), cfg);
    const auto a = evaluate(f, topo, p, cfg), b = evaluate(f, topo, q, cfg);
    for (std::size_t i = 0; i < a.logits.numel(); ++i) CHECK(a.logits.values()[i] == b.logits.values()[i]);
    CHECK(nn::serialize_checkpoint(to_checkpoint(q, cfg)) == bytes);
    FaigcnConfig other = cfg;
    other.variant = AttentionVariant::DotProduct;
    CHECK_THROWS_AS(from_checkpoint(nn::parse_checkpoint(bytes), other), FormatError);
  }

  TEST_CASE("attention map extraction") {
    std::vector<double> v(2 * 3 * kNumJoints);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = double(i);
    const nn::Tensor alpha({2, 3, kNumJoints}, v);
    const auto m = attention_map(alpha, 1);
    CHECK(m.num_bins == 3);
    CHECK(m.at(0, 0) == double(3 * kNumJoints));
    CHECK_THROWS_AS(attention_map(alpha, 2), DimensionError);
  }
}
