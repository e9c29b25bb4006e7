#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kgtopo {

/// Shortest round-trip decimal form; identical on every platform.
std::string format_double(double v);

/// Minimal RFC 4180 writer; fields containing separators or quotes are quoted.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string_view> header);
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  CsvWriter& field(std::string_view v);
  CsvWriter& field(double v) { return field(std::string_view(format_double(v))); }
  CsvWriter& field(std::size_t v) { return field(std::string_view(std::to_string(v))); }
  CsvWriter& field(bool v) { return field(std::string_view(v ? "1" : "0")); }
  CsvWriter& field(const char* v) { return field(std::string_view(v)); }
  CsvWriter& field(const std::string& v) { return field(std::string_view(v)); }
  void end_row();

 private:
  std::ofstream out_;
  bool row_started_ = false;
};

/// Whole-file reader keyed by header names.
class CsvTable {
 public:
  explicit CsvTable(const std::filesystem::path& path);

  std::size_t rows() const { return rows_.size(); }
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
  const std::string& at(std::size_t row, std::size_t col) const { return rows_[row][col]; }
  const std::vector<std::string>& header() const { return header_; }

 private:
  std::string path_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace kgtopo
