#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cortolam {

using Cell = std::variant<std::int64_t, double, std::string>;

/// Generic tabular output: a header plus rows of typed cells.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

/// Shortest decimal representation that parses back to the identical double.
std::string format_double(double v);

std::string format_cell(const Cell& cell);

/// Writes `table` as comma-separated text with a header line. Throws
/// Error(Io) if the path cannot be opened.
void write_table(const Table& table, const std::filesystem::path& path);

void write_text(const std::string& text, const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);

/// Raw CSV contents. Fields are unquoted; the formats produced here never
/// contain embedded commas.
class CsvDocument {
 public:
  static CsvDocument read(const std::filesystem::path& path);
  static CsvDocument parse(std::string_view text, std::string source = "<memory>");

  const std::vector<std::string>& header() const { return header_; }
  std::size_t size() const { return rows_.size(); }
  const std::vector<std::string>& row(std::size_t i) const { return rows_[i]; }
  const std::string& source() const { return source_; }

  std::optional<std::size_t> find_column(std::string_view name) const;
  /// Throws Error(Schema) naming the column when absent.
  std::size_t require_column(std::string_view name) const;

  /// Data row i is reported to users as row i+1 (line i+2 of the file).
  double number(std::size_t row, std::size_t col) const;
  std::int64_t integer(std::size_t row, std::size_t col) const;
  const std::string& text(std::size_t row, std::size_t col) const;

 private:
  std::string source_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::optional<double> parse_double(std::string_view s);
std::optional<std::int64_t> parse_int(std::string_view s);

std::string_view trim(std::string_view s);

}  // namespace cortolam
