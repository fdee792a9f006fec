// SPDX-License-Identifier: Apache-2.0
#include "faigcn/synth.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "faigcn/error.hpp"

namespace faigcn::synth {

namespace {

// Upright infant-sized skeleton in image pixels (y grows downwards).
constexpr std::array<std::array<double, 2>, kNumJoints> kRestPose = {{
    {320.0, 100.0},  // nose
    {320.0, 150.0},  // neck
    {280.0, 152.0},  // right shoulder
    {262.0, 200.0},  // right elbow
    {252.0, 248.0},  // right wrist
    {360.0, 152.0},  // left shoulder
    {378.0, 200.0},  // left elbow
    {388.0, 248.0},  // left wrist
    {296.0, 262.0},  // right hip
    {290.0, 332.0},  // right knee
    {287.0, 402.0},  // right ankle
    {344.0, 262.0},  // left hip
    {350.0, 332.0},  // left knee
    {353.0, 402.0},  // left ankle
    {311.0, 90.0},   // right eye
    {329.0, 90.0},   // left eye
    {300.0, 96.0},   // right ear
    {340.0, 96.0},   // left ear
}};

constexpr double kSubjectOffsetPx = 30.0;
constexpr double kConfidence = 0.9;

std::string subject_id(char prefix, std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%c%02zu", prefix, k + 1);
  return buf;
}

PoseSequence make_subject(const SynthSpec& spec, const std::vector<Component>& profile, Label label, std::string id,
                          nn::RngStream rng) {
  const auto frames = spec.frame_count();
  PoseSequence seq;
  seq.fps = spec.fps;
  seq.subject_id = std::move(id);
  seq.label = label;
  seq.frames.resize(frames);
  const double ox = rng.uniform(-kSubjectOffsetPx, kSubjectOffsetPx);
  const double oy = rng.uniform(-kSubjectOffsetPx, kSubjectOffsetPx);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      seq.frames[t][j] = {kRestPose[j][0] + ox, kRestPose[j][1] + oy, kConfidence};
    }
  }
  auto add_component = [&](const Component& c) {
    for (auto joint : limb_group_joints(c.group)) {
      const double amp = c.amplitude_px * (1.0 + rng.uniform(-spec.amplitude_spread, spec.amplitude_spread));
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double dir = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double w = 2.0 * std::numbers::pi * c.frequency_hz / spec.fps;
      for (std::size_t t = 0; t < frames; ++t) {
        const double s = amp * std::sin(w * static_cast<double>(t) + phase);
        auto& kp = seq.frames[t][index(joint)];
        kp.x += s * std::cos(dir);
        kp.y += s * std::sin(dir);
      }
    }
  };
  for (const auto& c : spec.shared_profile) add_component(c);
  for (const auto& c : profile) add_component(c);
  if (spec.jitter_std > 0.0) {
    for (auto& frame : seq.frames) {
      for (auto& kp : frame) {
        kp.x += rng.normal(0.0, spec.jitter_std);
        kp.y += rng.normal(0.0, spec.jitter_std);
      }
    }
  }
  return seq;
}

}  // namespace

std::string_view limb_group_name(LimbGroup g) {
  switch (g) {
    case LimbGroup::Wrists: return "wrists";
    case LimbGroup::Elbows: return "elbows";
    case LimbGroup::Knees: return "knees";
    case LimbGroup::Ankles: return "ankles";
    case LimbGroup::Head: return "head";
    case LimbGroup::AllJoints: return "all";
  }
  return "unknown";
}

std::vector<JointId> limb_group_joints(LimbGroup g) {
  using J = JointId;
  switch (g) {
    case LimbGroup::Wrists: return {J::RWrist, J::LWrist};
    case LimbGroup::Elbows: return {J::RElbow, J::LElbow};
    case LimbGroup::Knees: return {J::RKnee, J::LKnee};
    case LimbGroup::Ankles: return {J::RAnkle, J::LAnkle};
    case LimbGroup::Head: return {J::Nose, J::REye, J::LEye, J::REar, J::LEar};
    case LimbGroup::AllJoints: {
      std::vector<JointId> all;
      for (std::size_t j = 0; j < kNumJoints; ++j) all.push_back(static_cast<JointId>(j));
      return all;
    }
  }
  return {};
}

std::size_t SynthSpec::frame_count() const {
  return static_cast<std::size_t>(std::llround(duration_s * fps));
}

void SynthSpec::validate() const {
  if (n_normal < 1 || n_abnormal < 1) throw ParameterError("synthetic dataset needs both classes");
  if (!(fps >= 24.0 && fps <= 60.0)) throw ParameterError("synthetic fps must lie in [24, 60]");
  if (!(duration_s > 0.0) || frame_count() < 2) throw ParameterError("synthetic sequences need at least two frames");
  if (!(jitter_std >= 0.0) || !(amplitude_spread >= 0.0 && amplitude_spread < 1.0)) {
    throw ParameterError("invalid jitter or amplitude spread");
  }
  for (const auto* profile : {&normal_profile, &abnormal_profile, &shared_profile}) {
    for (const auto& c : *profile) {
      if (!(c.frequency_hz > 0.0) || c.frequency_hz >= fps / 2.0) {
        throw ParameterError("component at " + std::to_string(c.frequency_hz) + " Hz is not below Nyquist (" +
                             std::to_string(fps / 2.0) + " Hz)");
      }
      if (!(c.amplitude_px >= 0.0)) throw ParameterError("negative component amplitude");
    }
  }
}

SynthSpec preset(std::string_view name) {
  SynthSpec s;
  // Fidgety-like normal movement: several 1-3.5 Hz components on every limb
  // group. A weak slow drift is present in both classes.
  for (auto g : {LimbGroup::Wrists, LimbGroup::Elbows, LimbGroup::Knees, LimbGroup::Ankles}) {
    for (double f : {1.0, 1.5, 2.0, 2.5, 3.0, 3.5}) s.normal_profile.push_back({g, f, 6.0});
  }
  s.shared_profile = {
      {LimbGroup::Wrists, 0.3, 2.0},
      {LimbGroup::Ankles, 0.25, 2.0},
  };
  s.jitter_std = 1.5;
  if (name == "mini-like") return s;
  if (name == "rvi-like") {
    s.n_normal = 32;
    s.n_abnormal = 6;
    s.fps = 30.0;
    return s;
  }
  if (name == "noisy") {
    s.shared_profile.push_back({LimbGroup::AllJoints, 7.5, 4.0});
    s.shared_profile.push_back({LimbGroup::AllJoints, 9.0, 4.0});
    s.shared_profile.push_back({LimbGroup::AllJoints, 10.5, 4.0});
    return s;
  }
  throw ParameterError("unknown synthetic preset '" + std::string(name) + "' (mini-like, rvi-like, noisy)");
}

std::vector<PoseSequence> generate(const SynthSpec& spec) { return generate(spec, nn::RngStream(spec.seed)); }

std::vector<PoseSequence> generate(const SynthSpec& spec, nn::RngStream rng) {
  spec.validate();
  std::vector<PoseSequence> out;
  out.reserve(spec.n_normal + spec.n_abnormal);
  for (std::size_t k = 0; k < spec.n_normal; ++k) {
    out.push_back(make_subject(spec, spec.normal_profile, Label::Normal, subject_id('n', k), rng.fork(k)));
  }
  for (std::size_t k = 0; k < spec.n_abnormal; ++k) {
    out.push_back(make_subject(spec, spec.abnormal_profile, Label::Abnormal, subject_id('a', k),
                               rng.fork(spec.n_normal + k)));
  }
  return out;
}

}  // namespace faigcn::synth
