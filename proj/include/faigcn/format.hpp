// SPDX-License-Identifier: Apache-2.0
#pragma once

// Text helpers shared by every on-disk format: locale-independent number
// formatting and whole-file I/O with atomic replacement.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace faigcn::fmt {

/// Shortest decimal form that parses back to the identical double.
std::string shortest(double value);

/// Fixed-point with `digits` decimals ("91.67").
std::string fixed(double value, int digits);

/// Strict parse of a whole token; throws FormatError.
double to_double(std::string_view token);
long long to_integer(std::string_view token);

/// Splits on runs of ASCII whitespace.
std::vector<std::string_view> split_ws(std::string_view line);
std::vector<std::string_view> split(std::string_view line, char delim);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace faigcn::fmt
