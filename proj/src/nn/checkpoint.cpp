// SPDX-License-Identifier: Apache-2.0
#include "faigcn/nn/checkpoint.hpp"

#include "binary_io.hpp"
#include "faigcn/error.hpp"

namespace faigcn::nn {

namespace {
constexpr std::string_view kMagic = "FAIGCKPT";
}

const std::string* Checkpoint::find_meta(std::string_view key) const {
  for (const auto& [k, v] : metadata) {
    if (k == key) return &v;
  }
  return nullptr;
}

const NamedBlob* Checkpoint::find_blob(std::string_view name) const {
  for (const auto& b : blobs) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  faigcn::detail::ByteWriter w;
  w.raw(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(ckpt.blobs.size()));
  for (const auto& b : ckpt.blobs) {
    if (shape_numel(b.shape) != b.values.size()) {
      throw DimensionError("checkpoint blob '" + b.name + "' has shape " + shape_string(b.shape) + " but " +
                           std::to_string(b.values.size()) + " values");
    }
    w.str(b.name);
    w.u32(static_cast<std::uint32_t>(b.shape.size()));
    for (auto d : b.shape) w.u64(d);
    for (double v : b.values) w.f64(v);
  }
  return w.take();
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  faigcn::detail::ByteReader r(bytes);
  if (bytes.size() < kMagic.size() || r.raw(kMagic.size()) != kMagic) throw FormatError("not a checkpoint file");
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto n_meta = r.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto k = r.str();
    auto v = r.str();
    ckpt.metadata.emplace_back(std::move(k), std::move(v));
  }
  const auto n_blobs = r.u32();
  for (std::uint32_t i = 0; i < n_blobs; ++i) {
    NamedBlob b;
    b.name = r.str();
    const auto rank = r.u32();
    if (rank > 8) throw FormatError("checkpoint blob '" + b.name + "' has implausible rank");
    for (std::uint32_t d = 0; d < rank; ++d) b.shape.push_back(static_cast<std::size_t>(r.u64()));
    const auto n = shape_numel(b.shape);
    if (n > (bytes.size() - r.position()) / 8) throw ParseError("truncated binary data", r.position());
    b.values.resize(n);
    for (auto& v : b.values) v = r.f64();
    ckpt.blobs.push_back(std::move(b));
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint");
  return ckpt;
}

}  // namespace faigcn::nn
