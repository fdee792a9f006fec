// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "faigcn/error.hpp"
#include "faigcn/evalkit.hpp"
#include "faigcn/synth.hpp"
#include "test_support.hpp"

using namespace faigcn;
using namespace faigcn::eval;

TEST_SUITE("evalkit") {
  TEST_CASE("type 7 quantiles") {
    const std::vector<double> v{4.0, 1.0, 3.0, 2.0};
    CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
    CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
    CHECK(quantile(v, 0.75) == doctest::Approx(3.25));
    CHECK(quantile(v, 0.0) == 1.0);
    CHECK(quantile(v, 1.0) == 4.0);
    const std::vector<double> one{7.0};
    CHECK(quantile(one, 0.25) == 7.0);
    CHECK_THROWS_AS(quantile(std::vector<double>{}, 0.5), ParameterError);
    const auto s = summarize(0.3, {50.0, 100.0, 75.0});
    CHECK(s.mean == doctest::Approx(75.0));
    CHECK(s.q1 == doctest::Approx(62.5));
    CHECK(s.q3 == doctest::Approx(87.5));
    CHECK(s.accuracies == std::vector<double>{50.0, 100.0, 75.0});
  }

  TEST_CASE("noise scales with each coordinate's spread") {
    std::mt19937_64 gen(1);
    auto seq = testing::random_sequence(gen, 4000);
    for (auto& fr : seq.frames) fr[index(JointId::LEar)] = {};
    nn::RngStream rng(3);
    const double level = 0.6;
    const auto noisy = add_noise(seq, level, rng);
    for (std::size_t j : {0u, 7u, 12u}) {
      double mean = 0.0, var = 0.0, dmean = 0.0, dvar = 0.0;
      const double n = double(seq.frames.size());
      for (std::size_t t = 0; t < seq.frames.size(); ++t) {
        mean += seq.frames[t][j].x;
        dmean += noisy.frames[t][j].x - seq.frames[t][j].x;
      }
      mean /= n;
      dmean /= n;
      for (std::size_t t = 0; t < seq.frames.size(); ++t) {
        var += std::pow(seq.frames[t][j].x - mean, 2);
        dvar += std::pow(noisy.frames[t][j].x - seq.frames[t][j].x - dmean, 2);
      }
      CHECK(std::sqrt(dvar / var) == doctest::Approx(level).epsilon(0.05));
    }
    for (std::size_t t = 0; t < seq.frames.size(); ++t) CHECK(noisy.frames[t][index(JointId::LEar)] == Keypoint{});
    nn::RngStream again(3);
    CHECK(add_noise(seq, level, again).frames[5] == noisy.frames[5]);
    CHECK_THROWS_AS(add_noise(seq, 0.0, again), ParameterError);
  }

  TEST_CASE("noise settings are validated") {
    NoiseSpec s;
    CHECK(s.levels == std::vector<double>{0.15, 0.30, 0.60, 1.20});
    CHECK(s.seeds.size() == 10);
    s.levels = {0.3, 0.15};
    CHECK_THROWS_AS(s.validate(), ParameterError);
    s.levels = {0.15};
    s.seeds.clear();
    CHECK_THROWS_AS(s.validate(), ParameterError);
    CHECK(noise_stream(1, 0).seed() != noise_stream(1, 1).seed());
    CHECK(noise_stream(1, 0).seed() != noise_stream(2, 0).seed());
  }

  TEST_CASE("sweep mechanics on a tiny dataset") {
    auto spec = synth::preset("mini-like");
    spec.n_normal = 3;
    spec.n_abnormal = 2;
    spec.duration_s = 10.0;
    const auto seqs = synth::generate(spec);
    const auto sched = std::make_shared<const spectral::BinSchedule>(spectral::build_schedule(25.0, 250, 6.0, 1.2));
    NoiseSpec noise;
    noise.levels = {0.15, 1.2};
    noise.seeds = {4, 5};
    auto cfg = training::preset_config("rvi38_like");
    cfg.max_epochs = 2;
    const auto r = robustness_sweep(seqs, sched, noise, model::FaigcnConfig{}, cfg);
    CHECK(r.control.level == 0.0);
    REQUIRE(r.levels.size() == 2);
    CHECK(r.levels[1].accuracies.size() == 2);
    // The control row is a plain clean LOOCV per seed.
    const auto clean = data::prepare_all(seqs, sched);
    for (std::size_t k = 0; k < 2; ++k) {
      auto c = cfg;
      c.seed = noise.seeds[k];
      CHECK(r.control.accuracies[k] == training::loocv(clean, model::FaigcnConfig{}, c).accuracy());
    }
    const auto text = format_robustness_report(r);
    CHECK(text.rfind("level,mean,q1,q3,acc_seed4,acc_seed5\n0.00,", 0) == 0);
    CHECK(text == format_robustness_report(robustness_sweep(seqs, sched, noise, model::FaigcnConfig{}, cfg)));
  }

  TEST_CASE("attention export round trip") {
    model::AttentionMap m;
    m.num_bins = 3;
    nn::RngStream rng(8);
    m.alpha.resize(3 * kNumJoints);
    for (auto& a : m.alpha) a = rng.uniform();
    m.per_joint = model::per_joint_summary(m.alpha, 3);
    const auto text = export_attention(m, "n07");
    CHECK(text.rfind("faigcn-attention 1\nsubject n07\nbins 3\njoint\taggregate\tb0\tb1\tb2\n", 0) == 0);
    const auto back = parse_attention(text);
    CHECK(back.subject_id == "n07");
    CHECK(back.map.alpha == m.alpha);
    CHECK(back.map.per_joint == m.per_joint);
    CHECK(text.find("Right Knee\t") != std::string::npos);
    auto broken = text;
    broken.replace(broken.find("Right Knee"), 10, "Left Knee");
    CHECK_THROWS_AS(parse_attention(broken), FormatError);
  }
}
