#include "cortolam/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cortolam/error.hpp"

namespace cortolam {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Reference: return "reference";
    case ErrorKind::Io: return "io";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::Unavailable: return "unavailable";
    case ErrorKind::Config: return "config";
    case ErrorKind::Model: return "model";
    case ErrorKind::NotFound: return "not-found";
  }
  return "unknown";
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_cell(const Cell& cell) {
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&cell)) return format_double(*d);
  return std::get<std::string>(cell);
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_table(const Table& table, const std::filesystem::path& path) {
  std::string out;
  out.reserve(64 + table.rows.size() * table.columns.size() * 12);
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out += ',';
    out += table.columns[c];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += format_cell(row[c]);
    }
    out += '\n';
  }
  write_text(out, path);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  std::int64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

namespace {

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    fields.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

}  // namespace

CsvDocument CsvDocument::read(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw Error(ErrorKind::NotFound, "file not found: '" + path.string() + "'");
  return parse(read_text(path), path.string());
}

CsvDocument CsvDocument::parse(std::string_view text, std::string source) {
  CsvDocument doc;
  doc.source_ = std::move(source);
  bool have_header = false;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    if (!have_header) {
      doc.header_ = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() < doc.header_.size()) fields.resize(doc.header_.size());
    if (fields.size() > doc.header_.size())
      throw Error(ErrorKind::Schema, doc.source_ + ": row " + std::to_string(doc.rows_.size() + 1) +
                                         " has more fields than the header");
    doc.rows_.push_back(std::move(fields));
  }
  if (!have_header) throw Error(ErrorKind::Schema, doc.source_ + ": missing header row");
  return doc;
}

std::optional<std::size_t> CsvDocument::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i)
    if (header_[i] == name) return i;
  return std::nullopt;
}

std::size_t CsvDocument::require_column(std::string_view name) const {
  auto idx = find_column(name);
  if (!idx)
    throw Error(ErrorKind::Schema, source_ + ": missing required column '" + std::string(name) + "'");
  return *idx;
}

double CsvDocument::number(std::size_t row, std::size_t col) const {
  auto v = parse_double(rows_[row][col]);
  if (!v)
    throw Error(ErrorKind::Parse, source_ + ": row " + std::to_string(row + 1) + ", column '" +
                                      header_[col] + "': not a number: '" + rows_[row][col] + "'");
  return *v;
}

std::int64_t CsvDocument::integer(std::size_t row, std::size_t col) const {
  auto v = parse_int(rows_[row][col]);
  if (!v)
    throw Error(ErrorKind::Parse, source_ + ": row " + std::to_string(row + 1) + ", column '" +
                                      header_[col] + "': not an integer: '" + rows_[row][col] + "'");
  return *v;
}

const std::string& CsvDocument::text(std::size_t row, std::size_t col) const { return rows_[row][col]; }

}  // namespace cortolam
