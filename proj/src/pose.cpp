// SPDX-License-Identifier: Apache-2.0
#include "faigcn/pose.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "faigcn/error.hpp"
#include "faigcn/format.hpp"
#include "json.hpp"

namespace faigcn {

namespace {

constexpr std::array<std::string_view, kNumJoints> kJointNames = {
    "Nose",      "Neck",       "Right Shoulder", "Right Elbow", "Right Wrist", "Left Shoulder",
    "Left Elbow", "Left Wrist", "Right Hip",      "Right Knee",  "Right Ankle", "Left Hip",
    "Left Knee", "Left Ankle", "Right Eye",      "Left Eye",    "Right Ear",   "Left Ear",
};

constexpr std::size_t kValuesPerFrame = kNumJoints * 3;

PoseFrame frame_from_values(const nlohmann::json& values) {
  if (!values.is_array()) throw FormatError("keypoint list is not an array");
  if (values.size() % 3 != 0) {
    throw FormatError("keypoint count " + std::to_string(values.size()) +
                      " is not a multiple of 3");
  }
  if (values.size() != kValuesPerFrame) {
    throw FormatError("expected " + std::to_string(kValuesPerFrame) + " keypoint values, got " +
                      std::to_string(values.size()));
  }
  PoseFrame frame{};
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    double v[3];
    for (std::size_t k = 0; k < 3; ++k) {
      const auto& e = values[3 * j + k];
      if (!e.is_number()) throw FormatError("non-numeric keypoint value at index " + std::to_string(3 * j + k));
      v[k] = e.get<double>();
    }
    frame[j] = Keypoint{v[0], v[1], v[2]};
  }
  return frame;
}

const nlohmann::json* person_keypoints(const nlohmann::json& person) {
  if (!person.is_object()) throw FormatError("person entry is not an object");
  for (const char* key : {"pose_keypoints_2d", "pose_keypoints"}) {
    if (auto it = person.find(key); it != person.end()) return &*it;
  }
  throw FormatError("person entry has no pose_keypoints_2d");
}

}  // namespace

std::string_view joint_name(JointId j) { return kJointNames.at(index(j)); }

std::optional<JointId> joint_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumJoints; ++i) {
    if (kJointNames[i] == name) return static_cast<JointId>(i);
  }
  return std::nullopt;
}

std::string_view label_name(Label label) {
  return label == Label::Normal ? "normal" : "abnormal";
}

std::optional<Label> label_from_name(std::string_view name) {
  if (name == "normal") return Label::Normal;
  if (name == "abnormal") return Label::Abnormal;
  return std::nullopt;
}

void PoseSequence::validate() const {
  if (!(fps >= 24.0 && fps <= 60.0)) {
    throw FormatError("sequence '" + subject_id + "': fps " + fmt::shortest(fps) +
                      " outside [24, 60]");
  }
  if (frames.empty()) throw FormatError("sequence '" + subject_id + "' has no frames");
}

PoseFrame parse_keypoint_frame(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("malformed keypoint document", e.byte);
  }

  if (doc.is_object()) {
    auto people = doc.find("people");
    if (people == doc.end() || !people->is_array()) {
      throw FormatError("keypoint document has no 'people' array");
    }
    if (people->empty()) return PoseFrame{};
    return frame_from_values(*person_keypoints(people->front()));
  }
  if (doc.is_array()) {
    if (doc.empty()) return PoseFrame{};
    if (doc.front().is_array()) return frame_from_values(doc.front());
    if (doc.front().is_object()) return frame_from_values(*person_keypoints(doc.front()));
    return frame_from_values(doc);
  }
  throw FormatError("keypoint document must be an object or array");
}

std::string serialize_keypoint_frame(const PoseFrame& frame) {
  nlohmann::json values = nlohmann::json::array();
  for (const auto& kp : frame) {
    values.push_back(kp.x);
    values.push_back(kp.y);
    values.push_back(kp.confidence);
  }
  nlohmann::json person;
  person["pose_keypoints_2d"] = std::move(values);
  nlohmann::json doc;
  doc["version"] = 1.3;
  doc["people"] = nlohmann::json::array({std::move(person)});
  return doc.dump();
}

PoseSequence load_keypoint_directory(const std::filesystem::path& dir, double fps,
                                     std::string subject_id, std::optional<Label> label) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  if (files.empty()) throw FormatError("no .json keypoint files in " + dir.string());

  PoseSequence seq;
  seq.fps = fps;
  seq.subject_id = std::move(subject_id);
  seq.label = label;
  seq.frames.reserve(files.size());
  for (const auto& f : files) {
    try {
      seq.frames.push_back(parse_keypoint_frame(fmt::read_file(f)));
    } catch (const ParseError& e) {
      throw ParseError(f.filename().string() + ": malformed keypoint document", e.offset());
    } catch (const FormatError& e) {
      throw FormatError(f.filename().string() + ": " + e.what());
    }
  }
  seq.validate();
  return seq;
}

InterpolationResult interpolate_missing(const PoseSequence& seq, double conf_threshold) {
  if (!(conf_threshold >= 0.0 && conf_threshold < 1.0)) {
    throw ParameterError("confidence threshold must lie in [0, 1)");
  }
  InterpolationResult result{seq, {}};
  auto& frames = result.sequence.frames;
  const std::size_t n = frames.size();

  std::vector<std::size_t> present;
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    present.clear();
    for (std::size_t f = 0; f < n; ++f) {
      if (!seq.frames[f][j].missing(conf_threshold)) present.push_back(f);
    }
    if (present.empty()) {
      for (auto& frame : frames) frame[j] = Keypoint{};
      result.all_missing.push_back(static_cast<JointId>(j));
      continue;
    }
    if (present.size() == n) continue;

    // Leading gap.
    for (std::size_t f = 0; f < present.front(); ++f) frames[f][j] = seq.frames[present.front()][j];
    // Interior gaps.
    for (std::size_t k = 0; k + 1 < present.size(); ++k) {
      const std::size_t p = present[k];
      const std::size_t q = present[k + 1];
      if (q == p + 1) continue;
      const Keypoint& a = seq.frames[p][j];
      const Keypoint& b = seq.frames[q][j];
      const double span = static_cast<double>(q - p);
      for (std::size_t f = p + 1; f < q; ++f) {
        const double t = static_cast<double>(f - p) / span;
        frames[f][j] = Keypoint{a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t,
                                a.confidence + (b.confidence - a.confidence) * t};
      }
    }
    // Trailing gap.
    for (std::size_t f = present.back() + 1; f < n; ++f) frames[f][j] = seq.frames[present.back()][j];
  }
  return result;
}

PoseSequence normalize_global(const PoseSequence& seq) {
  std::array<bool, kNumJoints> absent{};
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    absent[j] = std::all_of(seq.frames.begin(), seq.frames.end(), [j](const PoseFrame& fr) {
      return fr[j].x == 0.0 && fr[j].y == 0.0;
    });
  }

  PoseSequence out = seq;
  std::vector<std::size_t> degenerate;
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    const PoseFrame& in = seq.frames[f];
    const Keypoint& neck = in[index(JointId::Neck)];
    const Keypoint& rhip = in[index(JointId::RHip)];
    const Keypoint& lhip = in[index(JointId::LHip)];
    const double cx = (neck.x + rhip.x + lhip.x) / 3.0;
    const double cy = (neck.y + rhip.y + lhip.y) / 3.0;
    const double nx = neck.x - cx;
    const double ny = neck.y - cy;
    const double r = std::hypot(nx, ny);
    if (!(r > 1e-12) || !std::isfinite(r)) {
      degenerate.push_back(f);
      continue;
    }
    const double ux = nx / r;
    const double uy = ny / r;
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      Keypoint& kp = out.frames[f][j];
      if (absent[j]) {
        kp.x = kp.y = 0.0;
        continue;
      }
      const double dx = in[j].x - cx;
      const double dy = in[j].y - cy;
      kp.x = uy * dx - ux * dy;
      kp.y = ux * dx + uy * dy;
    }
    // Exact by construction; rounding would otherwise leave ~1e-16 residue.
    out.frames[f][index(JointId::Neck)].x = 0.0;
    out.frames[f][index(JointId::Neck)].y = r;
  }
  if (!degenerate.empty()) throw DegenerateFrameError(std::move(degenerate));
  return out;
}

std::string serialize_sequence(const PoseSequence& seq, std::span<const JointId> missing) {
  std::string s;
  s.reserve(64 + seq.frames.size() * kNumJoints * 2 * 12);
  s += "faigcn-sequence " + std::to_string(kSequenceFormatVersion) + "\n";
  s += "subject_id " + seq.subject_id + "\n";
  s += "fps " + fmt::shortest(seq.fps) + "\n";
  s += "label ";
  s += seq.label ? label_name(*seq.label) : std::string_view("unknown");
  s += "\nframes " + std::to_string(seq.frames.size()) + "\n";
  s += "missing ";
  if (missing.empty()) {
    s += "-";
  } else {
    for (std::size_t i = 0; i < missing.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(index(missing[i]));
    }
  }
  s += '\n';
  for (const auto& frame : seq.frames) {
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      if (j) s += ' ';
      s += fmt::shortest(frame[j].x);
      s += ' ';
      s += fmt::shortest(frame[j].y);
    }
    s += '\n';
  }
  return s;
}

LoadedSequence parse_sequence(std::string_view text) {
  std::vector<std::string_view> lines;
  for (auto line : fmt::split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();

  std::size_t cursor = 0;
  auto header = [&](std::string_view key) -> std::string_view {
    if (cursor >= lines.size()) throw FormatError("sequence file truncated before '" + std::string(key) + "'");
    std::string_view line = lines[cursor++];
    if (!line.starts_with(key) || line.size() <= key.size() || line[key.size()] != ' ') {
      throw FormatError("sequence file line " + std::to_string(cursor) + ": expected '" +
                        std::string(key) + "'");
    }
    return line.substr(key.size() + 1);
  };

  auto version = header("faigcn-sequence");
  if (fmt::to_integer(version) != kSequenceFormatVersion) {
    throw FormatError("unsupported sequence format version " + std::string(version));
  }
  LoadedSequence out;
  PoseSequence& seq = out.sequence;
  seq.subject_id = std::string(header("subject_id"));
  seq.fps = fmt::to_double(header("fps"));
  auto label = header("label");
  if (label != "unknown") {
    seq.label = label_from_name(label);
    if (!seq.label) throw FormatError("unknown label '" + std::string(label) + "'");
  }
  const auto n = fmt::to_integer(header("frames"));
  if (n < 0) throw FormatError("negative frame count");
  auto missing = header("missing");
  if (missing != "-") {
    for (auto tok : fmt::split(missing, ',')) {
      auto j = fmt::to_integer(tok);
      if (j < 0 || j >= static_cast<long long>(kNumJoints)) throw FormatError("joint index out of range");
      out.missing.push_back(static_cast<JointId>(j));
    }
  }
  if (lines.size() - cursor != static_cast<std::size_t>(n)) {
    throw FormatError("sequence declares " + std::to_string(n) + " frames but has " +
                      std::to_string(lines.size() - cursor) + " rows");
  }
  seq.frames.resize(static_cast<std::size_t>(n));
  for (std::size_t f = 0; f < seq.frames.size(); ++f, ++cursor) {
    auto toks = fmt::split_ws(lines[cursor]);
    if (toks.size() != 2 * kNumJoints) {
      throw FormatError("sequence row " + std::to_string(f) + " has " + std::to_string(toks.size()) +
                        " values, expected 36");
    }
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      Keypoint& kp = seq.frames[f][j];
      kp.x = fmt::to_double(toks[2 * j]);
      kp.y = fmt::to_double(toks[2 * j + 1]);
      kp.confidence = (kp.x == 0.0 && kp.y == 0.0) ? 0.0 : 1.0;
    }
  }
  seq.validate();
  return out;
}

}  // namespace faigcn
