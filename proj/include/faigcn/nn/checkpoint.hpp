// SPDX-License-Identifier: Apache-2.0
#pragma once

// Parameter checkpoints: magic "FAIGCKPT", a format version, string metadata,
// then named row-major blobs with their shapes. All integers little-endian,
// values IEEE-754 binary64, so a parse/serialize cycle is byte-exact.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "faigcn/nn/tensor.hpp"

namespace faigcn::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedBlob {
  std::string name;
  Shape shape;
  std::vector<double> values;
  friend bool operator==(const NamedBlob&, const NamedBlob&) = default;
};

struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<NamedBlob> blobs;

  const std::string* find_meta(std::string_view key) const;
  const NamedBlob* find_blob(std::string_view name) const;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws ParseError on truncation and FormatError on a bad magic, version,
/// or shape/value count disagreement.
Checkpoint parse_checkpoint(std::string_view bytes);

}  // namespace faigcn::nn
