// SPDX-License-Identifier: Apache-2.0
#include "faigcn/error.hpp"

namespace faigcn {

ParseError::ParseError(const std::string& what, std::size_t offset)
    : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

namespace {
std::string describe_frames(const std::vector<std::size_t>& frames) {
  std::string msg = "degenerate frame(s): neck coincides with origin at frame";
  msg += frames.size() == 1 ? " " : "s ";
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (i) msg += ',';
    if (i == 16) {
      msg += "... (" + std::to_string(frames.size()) + " total)";
      break;
    }
    msg += std::to_string(frames[i]);
  }
  return msg;
}
}  // namespace

DegenerateFrameError::DegenerateFrameError(std::vector<std::size_t> frames)
    : Error(describe_frames(frames)), frames_(std::move(frames)) {}

}  // namespace faigcn
