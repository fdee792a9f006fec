// SPDX-License-Identifier: Apache-2.0
#include "faigcn/nn/optim.hpp"

#include <cmath>
#include <string>

#include "faigcn/error.hpp"

namespace faigcn::nn {

void adam_step(std::span<double> param, std::span<const double> grad, AdamState& state, double lr,
               const AdamConfig& config) {
  if (!(lr > 0.0)) throw ParameterError("learning rate must be positive, got " + std::to_string(lr));
  if (state.first_moment.size() != param.size() || state.second_moment.size() != param.size()) {
    state = AdamState(param.size());
  }
  const bool has_grad = !grad.empty();
  if (has_grad && grad.size() != param.size()) {
    throw DimensionError("adam_step: gradient of size " + std::to_string(grad.size()) + " for parameter of size " +
                         std::to_string(param.size()));
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = has_grad ? grad[i] : 0.0;
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g * g;
    param[i] -= lr * (m / c1) / (std::sqrt(v / c2) + config.eps);
  }
}

Adam::Adam(std::vector<Tensor> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  states_.reserve(params_.size());
  for (const auto& p : params_) states_.emplace_back(p.numel());
}

void Adam::step(double lr) {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    adam_step(params_[k].mutable_values(), params_[k].grad(), states_[k], lr, config_);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double lr_at(int epoch, double base_lr, double factor, int period) {
  if (epoch < 0) throw ParameterError("epoch must be non-negative");
  if (period < 1) throw ParameterError("decay period must be positive");
  return base_lr * std::pow(factor, epoch / period);
}

}  // namespace faigcn::nn
