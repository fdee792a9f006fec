// SPDX-License-Identifier: Apache-2.0
#pragma once

// Deterministic synthetic movement datasets: a static COCO-18 skeleton with
// class-specific sinusoidal limb oscillations plus Gaussian jitter. Normal
// subjects carry 1-4 Hz limb components; abnormal subjects lack them.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "faigcn/nn/rng.hpp"
#include "faigcn/pose.hpp"

namespace faigcn::synth {

enum class LimbGroup : std::uint8_t { Wrists, Elbows, Knees, Ankles, Head, AllJoints };

std::string_view limb_group_name(LimbGroup g);
std::vector<JointId> limb_group_joints(LimbGroup g);

struct Component {
  LimbGroup group = LimbGroup::Wrists;
  double frequency_hz = 1.0;
  double amplitude_px = 10.0;
};

struct SynthSpec {
  std::size_t n_normal = 8;
  std::size_t n_abnormal = 4;
  double fps = 25.0;
  double duration_s = 40.0;
  std::vector<Component> normal_profile;
  std::vector<Component> abnormal_profile;
  /// Present in both classes (slow posture drift, high-frequency nuisance).
  std::vector<Component> shared_profile;
  double jitter_std = 1.0;
  /// Relative per-subject amplitude variation (uniform in +-amplitude_spread).
  double amplitude_spread = 0.2;
  std::uint64_t seed = 0;

  std::size_t frame_count() const;
  /// Throws ParameterError: counts < 1, fps outside [24, 60], fewer than two
  /// frames, or any component at or above Nyquist.
  void validate() const;
};

/// "mini-like": 8 normal / 4 abnormal, 25 fps, 40 s. "rvi-like": 32 / 6 at
/// 30 fps. "noisy": mini-like plus nuisance components between 7 and 11 Hz
/// on every joint. Throws ParameterError for other names.
SynthSpec preset(std::string_view name);

/// Subjects are ordered normal first; ids are "n01".., "a01"...
std::vector<PoseSequence> generate(const SynthSpec& spec);

/// Same, drawing from an explicit stream instead of spec.seed.
std::vector<PoseSequence> generate(const SynthSpec& spec, nn::RngStream rng);

}  // namespace faigcn::synth
