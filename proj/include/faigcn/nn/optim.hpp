// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "faigcn/nn/tensor.hpp"

namespace faigcn::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step_count = 0;

  explicit AdamState(std::size_t size = 0) : first_moment(size, 0.0), second_moment(size, 0.0) {}
};

/// One bias-corrected Adam update of `param` in place. Throws ParameterError
/// when lr <= 0 and DimensionError when sizes disagree.
void adam_step(std::span<double> param, std::span<const double> grad, AdamState& state, double lr,
               const AdamConfig& config = {});

/// Adam over a fixed list of parameter tensors. Parameters that received no
/// gradient are stepped with a zero gradient.
class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, AdamConfig config = {});

  void step(double lr);
  void zero_grad();
  const std::vector<AdamState>& states() const noexcept { return states_; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamState> states_;
  AdamConfig config_;
};

/// Step decay: base_lr * factor^floor(epoch / period).
double lr_at(int epoch, double base_lr, double factor = 0.1, int period = 100);

}  // namespace faigcn::nn
