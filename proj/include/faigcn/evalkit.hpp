// SPDX-License-Identifier: Apache-2.0
#pragma once

// Gaussian-noise robustness sweeps and attention-map export.

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faigcn/dataset.hpp"
#include "faigcn/metrics.hpp"
#include "faigcn/model.hpp"
#include "faigcn/nn/rng.hpp"
#include "faigcn/pose.hpp"
#include "faigcn/training.hpp"

namespace faigcn::eval {

struct NoiseSpec {
  std::vector<double> levels{0.15, 0.30, 0.60, 1.20};  ///< fractions of the per-coordinate std
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};

  /// Throws ParameterError unless levels are positive and strictly ascending
  /// and at least one seed is given.
  void validate() const;
};

/// Adds N(0, (level * std)^2) to every coordinate, where std is that joint
/// coordinate's population standard deviation over the clean sequence.
/// Joints missing in every frame are left untouched. Throws ParameterError
/// when level <= 0.
PoseSequence add_noise(const PoseSequence& seq, double level, nn::RngStream& rng);

struct LevelSummary {
  double level = 0.0;  ///< 0 for the clean control row
  std::vector<double> accuracies;  ///< one per seed, in NoiseSpec order
  double mean = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

/// Quartiles by linear interpolation between order statistics (the
/// "type 7" rule): q(p) = x[floor(h)] + (h - floor(h)) (x[floor(h)+1] - x[floor(h)]),
/// h = (n - 1) p on the sorted sample.
double quantile(std::span<const double> values, double p);

LevelSummary summarize(double level, std::vector<double> accuracies);

struct RobustnessReport {
  LevelSummary control;
  std::vector<LevelSummary> levels;
  std::vector<std::uint64_t> seeds;
};

struct SweepOptions {
  training::LoocvOptions loocv;
  data::PreprocessOptions preprocess;
};

/// Noise stream of one sweep cell.
nn::RngStream noise_stream(std::uint64_t seed, std::size_t level_index) noexcept;

/// For every level and seed: repair each sequence, add noise drawn from
/// noise_stream(seed, level), normalize, extract features and run LOOCV with
/// training seed `seed`. The control row runs the clean features with every
/// seed.
RobustnessReport robustness_sweep(std::span<const PoseSequence> sequences,
                                  std::shared_ptr<const spectral::BinSchedule> schedule, const NoiseSpec& noise,
                                  const model::FaigcnConfig& model_config, const training::TrainConfig& config,
                                  const SweepOptions& options = {});

/// "level,mean,q1,q3,acc_seed<k>..." with the control row first.
std::string format_robustness_report(const RobustnessReport& report);

// --- attention export ------------------------------------------------------

/// Tab-separated table:
///   faigcn-attention 1
///   subject <id>
///   bins <B'>
///   joint  aggregate  b0  b1 ...
///   <18 rows: joint name, per-joint aggregate, alpha per bin>
/// Numbers use the shortest round-trip form.
std::string export_attention(const model::AttentionMap& map, std::string_view subject_id);

struct ParsedAttention {
  std::string subject_id;
  model::AttentionMap map;
};
ParsedAttention parse_attention(std::string_view text);

}  // namespace faigcn::eval
