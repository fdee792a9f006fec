// SPDX-License-Identifier: Apache-2.0
#pragma once

// Datasets on disk (one canonical sequence file per subject) and the
// preprocessing chain that turns a raw sequence into spectral features.

#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "faigcn/pose.hpp"
#include "faigcn/spectral.hpp"

namespace faigcn::data {

inline constexpr const char* kSequenceExtension = ".seq";

/// Every `*.seq` file in `dir`, in lexicographic filename order.
std::vector<PoseSequence> load_sequence_directory(const std::filesystem::path& dir);

/// Writes `<subject_id>.seq` per sequence, atomically.
void write_sequence_directory(const std::filesystem::path& dir, std::span<const PoseSequence> sequences);

/// Throws ProtocolError naming the first subject without a label.
void require_labels(std::span<const PoseSequence> sequences);

struct PreprocessOptions {
  double conf_threshold = 0.0;
};

/// interpolate_missing, normalize_global, extract_features.
spectral::SpectralFeatures prepare(const PoseSequence& seq, std::shared_ptr<const spectral::BinSchedule> schedule,
                                   const PreprocessOptions& options = {});

std::vector<spectral::SpectralFeatures> prepare_all(std::span<const PoseSequence> sequences,
                                                    std::shared_ptr<const spectral::BinSchedule> schedule,
                                                    const PreprocessOptions& options = {});

}  // namespace faigcn::data
