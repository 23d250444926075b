// SPDX-License-Identifier: Apache-2.0
//
// Artifact output helpers: shortest round-trip number formatting, CSV rows,
// whole-file writes and PGM images.
#pragma once

#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "iqa/synthenv.hpp"

namespace iqa::io {

/// Shortest decimal text that parses back to exactly `value`; "nan", "inf"
/// and "-inf" for non-finite values.
std::string format_double(double value);

/// Accumulates comma-separated rows. Fields are written verbatim, so callers
/// must not pass text containing commas or newlines.
class CsvWriter {
 public:
  explicit CsvWriter(std::initializer_list<std::string_view> header);

  CsvWriter& field(double value);
  CsvWriter& field(long long value);
  CsvWriter& field(int value) { return field(static_cast<long long>(value)); }
  CsvWriter& field(std::string_view text);
  void end_row();

  const std::string& text() const { return text_; }

 private:
  std::string text_;
  bool row_open_ = false;
};

/// Creates `dir` and its parents. Throws Error(kIo).
void ensure_dir(const std::string& dir);

/// Replaces the file contents. Throws Error(kIo).
void write_file(const std::string& path, std::string_view contents);

std::string read_file(const std::string& path);

/// Binary 8-bit PGM; intensities are clamped to [lo, hi] and scaled to 0-255.
void write_pgm(const std::string& path, const Grid& grid, double lo = 0.0,
               double hi = 1.0);

std::string join_path(const std::string& dir, std::string_view name);

}  // namespace iqa::io
