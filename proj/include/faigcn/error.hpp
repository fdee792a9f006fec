// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace faigcn {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed keypoint or report text. `offset()` is the byte position of the fault.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset);
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Well-formed input with the wrong structure (counts, headers, versions).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A numeric argument outside its documented domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Incompatible tensor or graph shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A violated operation precondition (e.g. backward on a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Training/evaluation protocol violation (single-class sets, duplicate ids, missing labels).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Frames in which the neck coincides with the normalization origin.
class DegenerateFrameError : public Error {
 public:
  explicit DegenerateFrameError(std::vector<std::size_t> frames);
  const std::vector<std::size_t>& frames() const noexcept { return frames_; }

 private:
  std::vector<std::size_t> frames_;
};

}  // namespace faigcn
