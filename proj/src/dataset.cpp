// SPDX-License-Identifier: Apache-2.0
#include "faigcn/dataset.hpp"

#include <algorithm>

#include "faigcn/error.hpp"
#include "faigcn/format.hpp"

namespace faigcn::data {

std::vector<PoseSequence> load_sequence_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw FormatError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == kSequenceExtension) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  if (files.empty()) throw FormatError("no " + std::string(kSequenceExtension) + " files in " + dir.string());
  std::vector<PoseSequence> out;
  out.reserve(files.size());
  for (const auto& f : files) {
    try {
      out.push_back(parse_sequence(fmt::read_file(f)).sequence);
    } catch (const ParseError& e) {
      throw ParseError(f.filename().string() + ": " + e.what(), e.offset());
    } catch (const FormatError& e) {
      throw FormatError(f.filename().string() + ": " + e.what());
    }
  }
  return out;
}

void write_sequence_directory(const std::filesystem::path& dir, std::span<const PoseSequence> sequences) {
  std::filesystem::create_directories(dir);
  for (const auto& seq : sequences) {
    fmt::write_file_atomic(dir / (seq.subject_id + kSequenceExtension), serialize_sequence(seq));
  }
}

void require_labels(std::span<const PoseSequence> sequences) {
  for (const auto& seq : sequences) {
    if (!seq.label) throw ProtocolError("subject '" + seq.subject_id + "' has no label");
  }
}

spectral::SpectralFeatures prepare(const PoseSequence& seq, std::shared_ptr<const spectral::BinSchedule> schedule,
                                   const PreprocessOptions& options) {
  auto repaired = interpolate_missing(seq, options.conf_threshold);
  return spectral::extract_features(normalize_global(repaired.sequence), std::move(schedule));
}

std::vector<spectral::SpectralFeatures> prepare_all(std::span<const PoseSequence> sequences,
                                                    std::shared_ptr<const spectral::BinSchedule> schedule,
                                                    const PreprocessOptions& options) {
  std::vector<spectral::SpectralFeatures> out;
  out.reserve(sequences.size());
  for (const auto& seq : sequences) out.push_back(prepare(seq, schedule, options));
  return out;
}

}  // namespace faigcn::data
