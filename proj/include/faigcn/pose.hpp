// SPDX-License-Identifier: Apache-2.0
#pragma once

// Pose ingestion: OpenPose COCO-18 keypoint parsing, gap repair by linear
// interpolation, and per-frame normalization into a body-centred frame.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace faigcn {

inline constexpr std::size_t kNumJoints = 18;

/// COCO-18 landmark order as emitted by OpenPose.
enum class JointId : std::uint8_t {
  Nose = 0,
  Neck,
  RShoulder,
  RElbow,
  RWrist,
  LShoulder,
  LElbow,
  LWrist,
  RHip,
  RKnee,
  RAnkle,
  LHip,
  LKnee,
  LAnkle,
  REye,
  LEye,
  REar,
  LEar,
};

constexpr std::size_t index(JointId j) noexcept { return static_cast<std::size_t>(j); }

/// Human-readable name ("Right Knee"); stable, used as a key in exported tables.
std::string_view joint_name(JointId j);
std::optional<JointId> joint_from_name(std::string_view name);

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double confidence = 0.0;

  /// Missing = both coordinates exactly zero, or (when a positive threshold is
  /// configured) confidence at or below it.
  bool missing(double conf_threshold = 0.0) const noexcept {
    return (x == 0.0 && y == 0.0) || (conf_threshold > 0.0 && confidence <= conf_threshold);
  }

  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

using PoseFrame = std::array<Keypoint, kNumJoints>;

enum class Label : std::uint8_t { Normal = 0, Abnormal = 1 };

std::string_view label_name(Label label);
std::optional<Label> label_from_name(std::string_view name);

struct PoseSequence {
  std::vector<PoseFrame> frames;
  double fps = 25.0;
  std::string subject_id;
  std::optional<Label> label;

  std::size_t size() const noexcept { return frames.size(); }
  /// Throws FormatError when fps is outside [24, 60] or frames is empty.
  void validate() const;
};

// --- keypoint files -------------------------------------------------------

/// Parses one OpenPose-style keypoint document. Accepted shapes:
///   {"people": [{"pose_keypoints_2d": [54 numbers]}, ...]}
///   [54 numbers]                     (a single person)
///   [[54 numbers], [54 numbers], ...] (several persons)
/// The first person is used; zero persons yields an all-missing frame.
PoseFrame parse_keypoint_frame(std::string_view text);

/// Inverse of parse_keypoint_frame (single-person OpenPose document).
std::string serialize_keypoint_frame(const PoseFrame& frame);

/// Reads `<dir>/*.json` in lexicographic filename order, one frame per file.
PoseSequence load_keypoint_directory(const std::filesystem::path& dir, double fps,
                                     std::string subject_id,
                                     std::optional<Label> label = std::nullopt);

// --- repair and normalization ---------------------------------------------

struct InterpolationResult {
  PoseSequence sequence;
  /// Joints missing in every frame; their trajectories are set to zero.
  std::vector<JointId> all_missing;
};

/// Fills each missing keypoint by linear interpolation in time between the
/// nearest present frames of the same joint; leading and trailing gaps hold
/// the nearest present value.
InterpolationResult interpolate_missing(const PoseSequence& seq, double conf_threshold = 0.0);

/// Per frame: subtract the centroid of {neck, right hip, left hip}, then rotate
/// so the neck lies on +y. Joints that are (0,0) in every frame stay zero.
/// Scale is left untouched. Throws DegenerateFrameError listing every frame in
/// which the neck coincides with the centroid.
PoseSequence normalize_global(const PoseSequence& seq);

// --- canonical sequence file ----------------------------------------------

/// Text format:
///   faigcn-sequence 1
///   subject_id <id>
///   fps <real>
///   label normal|abnormal|unknown
///   frames <n>
///   missing <comma separated joint indices | ->
///   <n rows of 36 numbers: x0 y0 x1 y1 ... x17 y17>
/// Confidence is not stored; on read, zero-coordinate keypoints get
/// confidence 0 and all others 1.
std::string serialize_sequence(const PoseSequence& seq, std::span<const JointId> missing = {});

struct LoadedSequence {
  PoseSequence sequence;
  std::vector<JointId> missing;
};
LoadedSequence parse_sequence(std::string_view text);

inline constexpr int kSequenceFormatVersion = 1;

}  // namespace faigcn
