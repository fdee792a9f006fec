// SPDX-License-Identifier: Apache-2.0
#pragma once

// Mini-batch Adam training with a step-decay schedule, evaluation-mode
// prediction, and the leave-one-out cross-validation harness.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faigcn/metrics.hpp"
#include "faigcn/model.hpp"
#include "faigcn/nn/optim.hpp"
#include "faigcn/spectral.hpp"

namespace faigcn::training {

struct TrainConfig {
  std::string preset = "mini_rgbd_like";
  std::size_t batch_size = 1;
  double base_lr = 1e-4;
  int max_epochs = 500;
  double decay_factor = 0.1;
  int decay_period = 100;
  std::uint64_t seed = 0;
  nn::AdamConfig adam;

  /// Throws ParameterError on batch_size < 1, max_epochs < 1 or lr <= 0.
  void validate() const;
};

/// "mini_rgbd_like" (batch 1, lr 1e-4) or "rvi38_like" (batch 4, lr 1e-3);
/// both run 500 epochs with a 0.1 decay every 100. Throws ParameterError.
TrainConfig preset_config(std::string_view name);

struct TrainResult {
  model::FaigcnParams params;
  std::vector<double> loss_curve;  ///< mean sample loss per epoch
};

/// Requires at least two labelled samples of equal bin count covering both
/// classes (ProtocolError otherwise). Each epoch visits the samples in a
/// seeded random order.
TrainResult train(std::span<const spectral::SpectralFeatures> train_set, const model::FaigcnConfig& model_config,
                  const TrainConfig& config);
/// Same, reusing a prebuilt topology.
TrainResult train(std::span<const spectral::SpectralFeatures> train_set, const model::Topology& topo,
                  const model::FaigcnConfig& model_config, const TrainConfig& config);

struct Prediction {
  Label label = Label::Normal;
  double p_abnormal = 0.0;
};

/// Class index 0 is normal, 1 abnormal; ties go to normal.
Prediction predict_from_logits(std::span<const double> logits);

Prediction predict(model::FaigcnParams& params, const model::Topology& topo, const model::FaigcnConfig& model_config,
                   const spectral::SpectralFeatures& features);

struct FoldResult {
  std::string held_out_id;
  Label truth = Label::Normal;
  Label predicted = Label::Normal;
  double probability = 0.0;  ///< p(abnormal)
  double final_loss = 0.0;
};

struct LoocvReport {
  std::vector<FoldResult> folds;  ///< in dataset order
  eval::ConfusionMatrix confusion;
  eval::MetricsReport metrics;
  std::uint64_t seed = 0;

  double accuracy() const { return metrics.ac; }
};

struct LoocvOptions {
  std::size_t workers = 1;
  /// Called after every fold (from the worker thread that ran it).
  std::function<void(const FoldResult&)> on_fold;
};

/// Seed of fold k: derive_seed(config.seed, k).
std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold) noexcept;

/// Checks the protocol preconditions shared by every LOOCV harness: at least
/// three samples, labels present, unique subject ids, both classes.
void check_loocv_dataset(std::span<const spectral::SpectralFeatures> dataset);

/// Trains on all samples but one, predicts the held-out one, for every
/// sample. Folds may run concurrently; the report does not depend on that.
LoocvReport loocv(std::span<const spectral::SpectralFeatures> dataset, const model::FaigcnConfig& model_config,
                  const TrainConfig& config, const LoocvOptions& options = {});

/// Stable text: header, one CSV row per fold, then a summary block.
std::string format_loocv_report(const LoocvReport& report);

struct SeedSweep {
  std::vector<LoocvReport> runs;
  double mean_accuracy = 0.0;
  double min_accuracy = 0.0;
  double max_accuracy = 0.0;
};

/// One LOOCV per seed; summary statistics over accuracy.
SeedSweep loocv_seeds(std::span<const spectral::SpectralFeatures> dataset, const model::FaigcnConfig& model_config,
                      const TrainConfig& config, std::span<const std::uint64_t> seeds,
                      const LoocvOptions& options = {});

}  // namespace faigcn::training
