// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "faigcn/error.hpp"
#include "faigcn/spectral.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace faigcn;
using namespace faigcn::spectral;

TEST_SUITE("spectral") {
  TEST_CASE("fast transform agrees with the direct sum for every small length") {
    std::mt19937_64 gen(1);
    std::normal_distribution<double> nd;
    for (std::size_t n = 2; n <= 64; ++n) {
      for (int trial = 0; trial < 5; ++trial) {
        TimeSeries ts;
        for (std::size_t i = 0; i < n; ++i) ts.samples.push_back(nd(gen));
        CHECK(testing::spectrum_error(fft_bluestein(ts), dft_naive(ts)) < 1e-9);
      }
    }
  }

  TEST_CASE("prime and composite long lengths") {
    std::mt19937_64 gen(2);
    std::normal_distribution<double> nd;
    for (std::size_t n : {97u, 127u, 360u, 997u, 1000u, 1024u}) {
      TimeSeries ts;
      for (std::size_t i = 0; i < n; ++i) ts.samples.push_back(nd(gen));
      CHECK(testing::spectrum_error(fft_bluestein(ts), dft_naive(ts)) < 1e-9);
    }
  }

  TEST_CASE("pure tone lands in its coefficient") {
    TimeSeries ts;
    ts.sample_rate = 25.0;
    const std::size_t n = 1000;
    for (std::size_t i = 0; i < n; ++i) ts.samples.push_back(std::cos(2.0 * std::numbers::pi * 40.0 * double(i) / n));
    const auto s = fft_bluestein(ts);
    CHECK(s.resolution == doctest::Approx(0.025));
    CHECK(std::abs(s.coefficients[40]) == doctest::Approx(500.0));
    CHECK(std::abs(s.coefficients[41]) < 1e-9);
  }

  TEST_CASE("plan handles complex input and rejects bad lengths") {
    FftPlan plan(5);
    std::vector<Complex> x{{1, 1}, {0, -1}, {2, 0}, {0, 0}, {-1, 3}};
    const auto y = plan.forward(x);
    for (std::size_t k = 0; k < 5; ++k) {
      Complex ref = 0;
      for (std::size_t t = 0; t < 5; ++t) ref += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * t) / 5.0);
      CHECK(std::abs(y[k] - ref) < 1e-12);
    }
    CHECK_THROWS_AS(FftPlan(1), ParameterError);
    CHECK_THROWS_AS((void)plan.forward(std::vector<Complex>(4)), DimensionError);
  }

  TEST_CASE("bin widths follow the growth rule") {
    const auto w = bin_widths(1, 1.00264, 1000);
    for (int n = 0; n < 154; ++n) CHECK(w[std::size_t(n)] == 1);
    CHECK(w[154] == 2);
    for (std::size_t n = 0; n < w.size(); ++n) CHECK(w[n] == testing::expected_width(1, 1.00264, int(n)));
    int total = 0;
    for (int x : w) total += x;
    CHECK(total >= 1000);
    CHECK(total - w.back() < 1000);

    const auto fast = bin_widths(2, 1.3, 200);
    for (std::size_t n = 0; n < fast.size(); ++n) CHECK(fast[n] == testing::expected_width(2, 1.3, int(n)));
    CHECK_THROWS_AS(bin_widths(1, 1.0, 10), ParameterError);
    CHECK_THROWS_AS(bin_widths(0, 1.1, 10), ParameterError);
  }

  TEST_CASE("default schedule partitions the kept coefficients") {
    const auto s = build_schedule();
    CHECK(s.coverage == 241);
    CHECK(s.num_bins() == 198);
    REQUIRE(s.edges.size() == s.num_bins() + 1);
    CHECK(s.edges.front() == 0);
    CHECK(s.edges.back() == 241);
    for (std::size_t b = 0; b < s.num_bins(); ++b) {
      CHECK(s.edges[b + 1] > s.edges[b]);
      CHECK(s.edges[b + 1] - s.edges[b] <= s.widths[b]);
    }
    CHECK_FALSE(s.unit_width());
    const auto u = build_unit_schedule();
    CHECK(u.unit_width());
    CHECK(u.num_bins() == 241);
  }

  TEST_CASE("resampling keeps duration and linear signals") {
    TimeSeries ts;
    ts.sample_rate = 30.0;
    for (int i = 0; i < 301; ++i) ts.samples.push_back(2.0 * i / 30.0 + 1.0);
    const auto r = resample(ts, 25.0);
    CHECK(r.sample_rate == 25.0);
    CHECK(r.samples.size() == 251);
    for (std::size_t i = 0; i < r.samples.size(); ++i) CHECK(r.samples[i] == doctest::Approx(2.0 * double(i) / 25.0 + 1.0));
  }

  TEST_CASE("features of a still pose are zero and a moving joint shows its tone") {
    PoseSequence seq;
    seq.fps = 25.0;
    seq.frames.resize(1000);
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
      for (std::size_t j = 0; j < kNumJoints; ++j) seq.frames[t][j] = {double(j) + 1.0, 2.0 * double(j) + 1.0, 1.0};
      seq.frames[t][index(JointId::LWrist)].x += 5.0 * std::sin(2.0 * std::numbers::pi * 2.0 * double(t) / 25.0);
    }
    const auto sched = std::make_shared<const BinSchedule>(build_schedule());
    const auto f = extract_features(seq, sched);
    CHECK(f.num_bins == sched->num_bins());
    CHECK(f.values.size() == f.num_bins * kNumJoints * kNumChannels);
    std::size_t peak_bin = 0;
    for (std::size_t b = 0; b < f.num_bins; ++b) {
      CHECK(f.at(b, index(JointId::Nose), 0) < 1e-9);
      if (f.at(b, index(JointId::LWrist), 0) > f.at(peak_bin, index(JointId::LWrist), 0)) peak_bin = b;
    }
    // 2 Hz is coefficient 80 at 0.025 Hz resolution.
    CHECK(sched->edges[peak_bin] <= 80);
    CHECK(sched->edges[peak_bin + 1] > 80);
  }

  TEST_CASE("feature files round trip in both encodings") {
    std::mt19937_64 gen(4);
    const auto seq = testing::random_sequence(gen, 300, 25.0, "rt");
    auto f = extract_features(seq, std::make_shared<const BinSchedule>(build_schedule(25.0, 256, 6.0, 1.05)));
    f.label = Label::Normal;
    const auto t = parse_features_text(serialize_features_text(f));
    const auto b = parse_features_binary(serialize_features_binary(f));
    for (const auto* g : {&t, &b}) {
      CHECK(g->values == f.values);
      CHECK(g->subject_id == "rt");
      CHECK(g->label == Label::Normal);
      REQUIRE(g->schedule);
      CHECK(g->schedule->edges == f.schedule->edges);
      CHECK(g->schedule->c == f.schedule->c);
    }
    CHECK_THROWS_AS(parse_features_binary("NOTMAGIC"), Error);
    CHECK_THROWS_AS(parse_features_text("faigcn-features 9\n"), FormatError);
  }

  TEST_CASE("c search picks the best value and the smallest on ties") {
    const std::vector<double> grid{1.3, 1.1, 1.2, 1.4};
    CHECK(search_c(grid, [](double c) { return c == 1.2 ? 2.0 : 1.0; }) == 1.2);
    CHECK(search_c(grid, [](double c) { return c >= 1.2 ? 5.0 : 1.0; }) == 1.2);
    CHECK(search_c(grid, [](double) { return 0.0; }) == 1.1);
    CHECK_THROWS_AS(search_c({}, [](double) { return 0.0; }), ParameterError);
    const std::vector<double> bad{1.0};
    CHECK_THROWS_AS(search_c(bad, [](double) { return 0.0; }), ParameterError);
  }
}
