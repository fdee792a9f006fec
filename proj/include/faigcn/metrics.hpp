// SPDX-License-Identifier: Apache-2.0
#pragma once

// Binary classification metrics with "abnormal" as the positive class. Every
// value is a percentage; MCC is scaled by 100 as well.

#include <cstddef>
#include <cstdint>
#include <string>

#include "faigcn/pose.hpp"

namespace faigcn::eval {

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;

  std::size_t total() const noexcept { return tp + fn + tn + fp; }
  void add(Label truth, Label predicted) noexcept;
  /// Class roles exchanged: tp <-> tn, fp <-> fn.
  ConfusionMatrix swapped() const noexcept { return {tn, fp, tp, fn}; }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Bits set in MetricsReport::undefined when a denominator was zero.
enum MetricFlag : std::uint8_t {
  kSeUndefined = 1,
  kSpUndefined = 2,
  kF1Undefined = 4,
  kMccUndefined = 8,
};

struct MetricsReport {
  double ac = 0.0;
  double se = 0.0;
  double sp = 0.0;
  double f1 = 0.0;
  double mcc = 0.0;
  std::uint8_t undefined = 0;  ///< MetricFlag bits; the flagged values are 0
};

/// Throws ParameterError on an empty matrix.
MetricsReport metrics(const ConfusionMatrix& cm);

/// "AC=91.67 SE=100.00 SP=87.50 F1=88.89 MCC=83.67", with a trailing
/// " undefined=SE,MCC" when any flag is set.
std::string format_metrics(const MetricsReport& m);

}  // namespace faigcn::eval
