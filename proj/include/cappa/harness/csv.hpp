#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace cappa::harness {

/// An empty optional-like cell is written as an empty field.
struct Empty {};
using Cell = std::variant<Empty, std::string, double, std::int64_t, std::uint64_t, bool>;

/// Round-trip formatting: 17 significant digits, '.' decimal
/// separator, "nan" / "inf" / "-inf" for non-finite values.
std::string format_double(double v);

/// RFC 4180 field quoting.
std::string csv_escape(const std::string& field);

/// A CSV file preceded by a block of "# key=value" lines. Rows use CRLF.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns);

  void add_meta(std::string key, std::string value);
  /// Throws InvalidArgument when the row width differs from the header.
  void add_row(std::vector<Cell> row);

  std::size_t row_count() const noexcept { return rows_.size(); }
  const std::vector<std::string>& columns() const noexcept { return columns_; }

  std::string render() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::pair<std::string, std::string>> meta_;
  std::vector<std::vector<Cell>> rows_;
};

/// Writes `content` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace cappa::harness
