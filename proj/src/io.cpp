// SPDX-License-Identifier: Apache-2.0
#include "iqa/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "iqa/error.hpp"

namespace iqa::io {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::initializer_list<std::string_view> header) {
  for (auto h : header) field(h);
  end_row();
}

CsvWriter& CsvWriter::field(double value) { return field(format_double(value)); }

CsvWriter& CsvWriter::field(long long value) {
  return field(std::to_string(value));
}

CsvWriter& CsvWriter::field(std::string_view text) {
  if (row_open_) text_ += ',';
  text_ += text;
  row_open_ = true;
  return *this;
}

void CsvWriter::end_row() {
  text_ += '\n';
  row_open_ = false;
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create directory " + dir);
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_pgm(const std::string& path, const Grid& grid, double lo,
               double hi) {
  std::string data = "P5\n" + std::to_string(grid.width()) + " " +
                     std::to_string(grid.height()) + "\n255\n";
  for (double v : grid.values()) {
    const double u = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
    data += static_cast<char>(static_cast<unsigned char>(std::lround(u * 255)));
  }
  write_file(path, data);
}

std::string join_path(const std::string& dir, std::string_view name) {
  if (dir.empty()) return std::string(name);
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace iqa::io
