#pragma once

// CSV output with '#' metadata lines, written atomically (temp file + rename).

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pacmeta/error.hpp"

namespace pacmeta {

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw NumericError("format_double: conversion failed");
  return std::string(buf, ptr);
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Writes `content` to a sibling temp file, then renames it over `path`.
inline void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    f << content;
    f.flush();
    if (!f) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot move output into place at '" + path + "': " + ec.message());
  }
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  /// Metadata emitted before the header ("# text").
  void meta(const std::string& text) { head_.push_back(text); }
  /// Metadata emitted after the last row.
  void trailer(const std::string& text) { tail_.push_back(text); }

  void add_row(std::vector<std::string> cells) {
    detail::require(cells.size() == columns_.size(), "CsvTable: row has " + std::to_string(cells.size()) +
                                                         " cells, expected " + std::to_string(columns_.size()));
    rows_.push_back(std::move(cells));
  }

  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t rows() const { return rows_.size(); }

  const std::string& cell(std::size_t row, const std::string& column) const {
    const auto it = std::find(columns_.begin(), columns_.end(), column);
    detail::require(it != columns_.end(), "CsvTable: no column '" + column + "'");
    detail::require(row < rows_.size(), "CsvTable: row out of range");
    return rows_[row][std::size_t(it - columns_.begin())];
  }

  std::string str() const {
    std::string out;
    for (const auto& m : head_) out += "# " + m + "\n";
    out += join(columns_);
    for (const auto& r : rows_) out += join(r);
    for (const auto& m : tail_) out += "# " + m + "\n";
    return out;
  }

  void write_atomic(const std::string& path) const { pacmeta::write_atomic(path, str()); }

 private:
  static std::string join(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) line += ',';
      line += cells[i];
    }
    return line + "\n";
  }

  std::vector<std::string> columns_;
  std::vector<std::string> head_;
  std::vector<std::string> tail_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace pacmeta
