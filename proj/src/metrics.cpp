// SPDX-License-Identifier: Apache-2.0
#include "faigcn/metrics.hpp"

#include <cmath>

#include "faigcn/error.hpp"
#include "faigcn/format.hpp"

namespace faigcn::eval {

void ConfusionMatrix::add(Label truth, Label predicted) noexcept {
  if (truth == Label::Abnormal) {
    ++(predicted == Label::Abnormal ? tp : fn);
  } else {
    ++(predicted == Label::Normal ? tn : fp);
  }
}

MetricsReport metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ParameterError("metrics of an empty confusion matrix");
  const double tp = static_cast<double>(cm.tp), fn = static_cast<double>(cm.fn);
  const double tn = static_cast<double>(cm.tn), fp = static_cast<double>(cm.fp);
  MetricsReport r;
  auto ratio = [&r](double num, double den, MetricFlag flag) {
    if (den == 0.0) {
      r.undefined |= flag;
      return 0.0;
    }
    return 100.0 * num / den;
  };
  r.ac = 100.0 * (tp + tn) / static_cast<double>(cm.total());
  r.se = ratio(tp, tp + fn, kSeUndefined);
  r.sp = ratio(tn, tn + fp, kSpUndefined);
  r.f1 = ratio(2.0 * tp, 2.0 * tp + fp + fn, kF1Undefined);
  r.mcc = ratio(tp * tn - fp * fn, std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)), kMccUndefined);
  return r;
}

std::string format_metrics(const MetricsReport& m) {
  std::string s = "AC=" + fmt::fixed(m.ac, 2) + " SE=" + fmt::fixed(m.se, 2) + " SP=" + fmt::fixed(m.sp, 2) +
                  " F1=" + fmt::fixed(m.f1, 2) + " MCC=" + fmt::fixed(m.mcc, 2);
  if (m.undefined != 0) {
    std::string names;
    auto add = [&](MetricFlag f, const char* name) {
      if (m.undefined & f) names += (names.empty() ? "" : ",") + std::string(name);
    };
    add(kSeUndefined, "SE");
    add(kSpUndefined, "SP");
    add(kF1Undefined, "F1");
    add(kMccUndefined, "MCC");
    s += " undefined=" + names;
  }
  return s;
}

}  // namespace faigcn::eval
