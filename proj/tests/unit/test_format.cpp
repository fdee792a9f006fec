// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "faigcn/error.hpp"
#include "faigcn/format.hpp"
#include "test_support.hpp"

using namespace faigcn;

TEST_SUITE("format") {
  TEST_CASE("shortest form round-trips every double it prints") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 2000; ++i) {
      const double v = u(gen) * std::pow(10.0, double(int(gen() % 40) - 20));
      CHECK(fmt::to_double(fmt::shortest(v)) == v);
    }
    CHECK(fmt::shortest(0.5) == "0.5");
    CHECK(fmt::shortest(25.0) == "25");
    CHECK(fmt::fixed(91.666666, 2) == "91.67");
  }

  TEST_CASE("strict token parsing") {
    CHECK(fmt::to_integer("42") == 42);
    CHECK_THROWS_AS(fmt::to_double("1.5x"), FormatError);
    CHECK_THROWS_AS(fmt::to_double(""), FormatError);
    CHECK_THROWS_AS(fmt::to_integer("4.0"), FormatError);
  }

  TEST_CASE("splitting") {
    const auto ws = fmt::split_ws("  a \t bb  c ");
    REQUIRE(ws.size() == 3);
    CHECK(ws[1] == "bb");
    const auto parts = fmt::split("1,,2", ',');
    REQUIRE(parts.size() == 3);
    CHECK(parts[1].empty());
  }

  TEST_CASE("atomic write then read") {
    testing::ScratchDir dir("format");
    const auto p = dir.path() / "f.txt";
    fmt::write_file_atomic(p, "first");
    fmt::write_file_atomic(p, "second\n");
    CHECK(fmt::read_file(p) == "second\n");
    CHECK_THROWS_AS(fmt::read_file(dir.path() / "absent"), Error);
  }
}
