#include "cappa/harness/csv.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "cappa/error.hpp"

namespace cappa::harness {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", v);
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

CsvTable::CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {
  if (columns_.empty()) throw InvalidArgument("CsvTable: no columns");
}

void CsvTable::add_meta(std::string key, std::string value) {
  if (key.find_first_of("=\r\n") != std::string::npos || value.find_first_of("\r\n") != std::string::npos)
    throw InvalidArgument("CsvTable: metadata must be single-line key=value");
  meta_.emplace_back(std::move(key), std::move(value));
}

void CsvTable::add_row(std::vector<Cell> row) {
  if (row.size() != columns_.size())
    throw InvalidArgument(fmt::format("CsvTable: row has {} fields, header has {}", row.size(), columns_.size()));
  rows_.push_back(std::move(row));
}

namespace {

struct CellFormatter {
  std::string operator()(Empty) const { return {}; }
  std::string operator()(const std::string& s) const { return csv_escape(s); }
  std::string operator()(double v) const { return format_double(v); }
  std::string operator()(std::int64_t v) const { return std::to_string(v); }
  std::string operator()(std::uint64_t v) const { return std::to_string(v); }
  std::string operator()(bool v) const { return v ? "true" : "false"; }
};

}  // namespace

std::string CsvTable::render() const {
  std::string out;
  for (const auto& [k, v] : meta_) out += "# " + k + "=" + v + "\r\n";
  for (std::size_t i = 0; i < columns_.size(); ++i) out += (i ? "," : "") + csv_escape(columns_[i]);
  out += "\r\n";
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += std::visit(CellFormatter{}, row[i]);
    }
    out += "\r\n";
  }
  return out;
}

void CsvTable::write(const std::filesystem::path& path) const { write_text_file(path, render()); }

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace cappa::harness
