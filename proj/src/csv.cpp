#include "kgtopo/csv.hpp"

#include <array>
#include <charconv>

#include "kgtopo/ids.hpp"

namespace kgtopo {

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw Error("format_double failed");
  return std::string(buf.data(), ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path,
                     std::initializer_list<std::string_view> header)
    : out_(path, std::ios::binary) {
  if (!out_) throw Error("cannot write " + path.string());
  for (auto h : header) field(h);
  end_row();
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary) {
  if (!out_) throw Error("cannot write " + path.string());
  for (const auto& h : header) field(std::string_view(h));
  end_row();
}

CsvWriter& CsvWriter::field(std::string_view v) {
  if (row_started_) out_.put(',');
  row_started_ = true;
  if (v.find_first_of(",\"\n\r") == std::string_view::npos) {
    out_ << v;
    return *this;
  }
  out_.put('"');
  for (char c : v) {
    if (c == '"') out_.put('"');
    out_.put(c);
  }
  out_.put('"');
  return *this;
}

void CsvWriter::end_row() {
  out_.put('\n');
  row_started_ = false;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(std::move(field));
  return out;
}

CsvTable::CsvTable(const std::filesystem::path& path) : path_(path.string()) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path_, 0, "cannot open file");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (header_.empty()) {
      header_ = std::move(fields);
      continue;
    }
    if (fields.size() != header_.size())
      throw ParseError(path_, line_no, "expected " + std::to_string(header_.size()) + " fields");
    rows_.push_back(std::move(fields));
  }
  if (header_.empty()) throw ParseError(path_, 0, "missing header row");
}

bool CsvTable::has_column(std::string_view name) const {
  for (const auto& h : header_)
    if (h == name) return true;
  return false;
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i)
    if (header_[i] == name) return i;
  throw ParseError(path_, 1, "missing column '" + std::string(name) + "'");
}

}  // namespace kgtopo
