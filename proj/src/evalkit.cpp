// SPDX-License-Identifier: Apache-2.0
#include "faigcn/evalkit.hpp"

#include <algorithm>
#include <cmath>

#include "faigcn/error.hpp"
#include "faigcn/format.hpp"

namespace faigcn::eval {

void NoiseSpec::validate() const {
  if (levels.empty()) throw ParameterError("noise sweep needs at least one level");
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (!(levels[k] > 0.0)) throw ParameterError("noise levels must be positive");
    if (k > 0 && !(levels[k] > levels[k - 1])) throw ParameterError("noise levels must be strictly ascending");
  }
  if (seeds.empty()) throw ParameterError("noise sweep needs at least one seed");
}

PoseSequence add_noise(const PoseSequence& seq, double level, nn::RngStream& rng) {
  if (!(level > 0.0)) throw ParameterError("noise level must be positive");
  PoseSequence out = seq;
  const auto frames = seq.size();
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    std::size_t present = 0;
    double sum[2] = {0.0, 0.0}, sq[2] = {0.0, 0.0};
    for (const auto& f : seq.frames) {
      if (f[j].missing()) continue;
      ++present;
      sum[0] += f[j].x;
      sum[1] += f[j].y;
    }
    if (present == 0) continue;
    const double mean[2] = {sum[0] / static_cast<double>(present), sum[1] / static_cast<double>(present)};
    for (const auto& f : seq.frames) {
      if (f[j].missing()) continue;
      sq[0] += (f[j].x - mean[0]) * (f[j].x - mean[0]);
      sq[1] += (f[j].y - mean[1]) * (f[j].y - mean[1]);
    }
    for (int c = 0; c < 2; ++c) {
      const double sigma = level * std::sqrt(sq[c] / static_cast<double>(present));
      for (std::size_t t = 0; t < frames; ++t) {
        auto& kp = out.frames[t][j];
        if (seq.frames[t][j].missing()) continue;
        (c == 0 ? kp.x : kp.y) += rng.normal(0.0, sigma);
      }
    }
  }
  return out;
}

double quantile(std::span<const double> values, double p) {
  if (values.empty()) throw ParameterError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("quantile probability outside [0, 1]");
  std::vector<double> x(values.begin(), values.end());
  std::sort(x.begin(), x.end());
  const double h = static_cast<double>(x.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= x.size()) return x.back();
  return x[lo] + (h - static_cast<double>(lo)) * (x[lo + 1] - x[lo]);
}

LevelSummary summarize(double level, std::vector<double> accuracies) {
  LevelSummary s;
  s.level = level;
  double sum = 0.0;
  for (double a : accuracies) sum += a;
  s.mean = sum / static_cast<double>(accuracies.size());
  s.q1 = quantile(accuracies, 0.25);
  s.q3 = quantile(accuracies, 0.75);
  s.accuracies = std::move(accuracies);
  return s;
}

nn::RngStream noise_stream(std::uint64_t seed, std::size_t level_index) noexcept {
  return nn::RngStream(nn::derive_seed(seed, 0x6E6F697365ULL + level_index));
}

RobustnessReport robustness_sweep(std::span<const PoseSequence> sequences,
                                  std::shared_ptr<const spectral::BinSchedule> schedule, const NoiseSpec& noise,
                                  const model::FaigcnConfig& model_config, const training::TrainConfig& config,
                                  const SweepOptions& options) {
  noise.validate();
  data::require_labels(sequences);
  std::vector<PoseSequence> repaired;
  repaired.reserve(sequences.size());
  for (const auto& seq : sequences) {
    repaired.push_back(interpolate_missing(seq, options.preprocess.conf_threshold).sequence);
  }
  auto run = [&](std::span<const spectral::SpectralFeatures> features, std::uint64_t seed) {
    auto c = config;
    c.seed = seed;
    return training::loocv(features, model_config, c, options.loocv).accuracy();
  };

  RobustnessReport report;
  report.seeds = noise.seeds;
  const auto clean = data::prepare_all(repaired, schedule, options.preprocess);
  std::vector<double> control;
  for (auto seed : noise.seeds) control.push_back(run(clean, seed));
  report.control = summarize(0.0, std::move(control));

  for (std::size_t l = 0; l < noise.levels.size(); ++l) {
    std::vector<double> acc;
    for (auto seed : noise.seeds) {
      const auto stream = noise_stream(seed, l);
      std::vector<spectral::SpectralFeatures> features;
      features.reserve(repaired.size());
      for (std::size_t i = 0; i < repaired.size(); ++i) {
        auto rng = stream.fork(i);
        features.push_back(data::prepare(add_noise(repaired[i], noise.levels[l], rng), schedule, options.preprocess));
      }
      acc.push_back(run(features, seed));
    }
    report.levels.push_back(summarize(noise.levels[l], std::move(acc)));
  }
  return report;
}

std::string format_robustness_report(const RobustnessReport& report) {
  std::string s = "level,mean,q1,q3";
  for (auto seed : report.seeds) s += ",acc_seed" + std::to_string(seed);
  s += '\n';
  auto row = [&s](const LevelSummary& r) {
    s += fmt::fixed(r.level, 2) + ',' + fmt::fixed(r.mean, 4) + ',' + fmt::fixed(r.q1, 4) + ',' + fmt::fixed(r.q3, 4);
    for (double a : r.accuracies) s += ',' + fmt::fixed(a, 4);
    s += '\n';
  };
  row(report.control);
  for (const auto& r : report.levels) row(r);
  return s;
}

std::string export_attention(const model::AttentionMap& map, std::string_view subject_id) {
  if (map.alpha.size() != map.num_bins * kNumJoints) throw DimensionError("attention map size mismatch");
  std::string s = "faigcn-attention 1\nsubject " + std::string(subject_id) + "\nbins " +
                  std::to_string(map.num_bins) + "\njoint\taggregate";
  for (std::size_t b = 0; b < map.num_bins; ++b) s += "\tb" + std::to_string(b);
  s += '\n';
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    s += std::string(joint_name(static_cast<JointId>(j))) + '\t' + fmt::shortest(map.per_joint[j]);
    for (std::size_t b = 0; b < map.num_bins; ++b) s += '\t' + fmt::shortest(map.at(b, j));
    s += '\n';
  }
  return s;
}

ParsedAttention parse_attention(std::string_view text) {
  std::vector<std::string_view> lines = fmt::split(text, '\n');
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  auto expect = [&](std::size_t k, std::string_view key) {
    if (k >= lines.size() || !lines[k].starts_with(key)) {
      throw FormatError("attention file: expected '" + std::string(key) + "' on line " + std::to_string(k + 1));
    }
    return lines[k].substr(key.size());
  };
  if (expect(0, "faigcn-attention ") != "1") throw FormatError("attention file: unsupported version");
  ParsedAttention out;
  out.subject_id = std::string(expect(1, "subject "));
  const auto bins = fmt::to_integer(expect(2, "bins "));
  if (bins < 1) throw FormatError("attention file: bin count must be positive");
  out.map.num_bins = static_cast<std::size_t>(bins);
  out.map.alpha.assign(out.map.num_bins * kNumJoints, 0.0);
  expect(3, "joint\taggregate");
  if (lines.size() != 4 + kNumJoints) throw FormatError("attention file: expected 18 joint rows");
  std::vector<bool> seen(kNumJoints, false);
  for (std::size_t r = 0; r < kNumJoints; ++r) {
    auto cells = fmt::split(lines[4 + r], '\t');
    if (cells.size() != 2 + out.map.num_bins) {
      throw FormatError("attention file: row " + std::to_string(r + 1) + " has " + std::to_string(cells.size()) +
                        " cells");
    }
    auto joint = joint_from_name(cells[0]);
    if (!joint) throw FormatError("attention file: unknown joint '" + std::string(cells[0]) + "'");
    const auto j = index(*joint);
    if (seen[j]) throw FormatError("attention file: joint '" + std::string(cells[0]) + "' listed twice");
    seen[j] = true;
    out.map.per_joint[j] = fmt::to_double(cells[1]);
    for (std::size_t b = 0; b < out.map.num_bins; ++b) {
      out.map.alpha[b * kNumJoints + j] = fmt::to_double(cells[2 + b]);
    }
  }
  return out;
}

}  // namespace faigcn::eval
