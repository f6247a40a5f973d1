#include "semloc/csv.hpp"

#include <charconv>

#include "semloc/errors.hpp"

namespace semloc {

namespace {

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view f = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    fields.emplace_back(f);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

}  // namespace

CsvTable CsvTable::parse(std::string_view text) {
  CsvTable table;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    auto fields = split(line);
    if (table.header_.empty()) {
      table.header_ = std::move(fields);
      continue;
    }
    if (fields.size() != table.header_.size())
      throw FormatError("CSV line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                        " fields, expected " + std::to_string(table.header_.size()));
    table.rows_.push_back(std::move(fields));
  }
  if (table.header_.empty()) throw FormatError("CSV input has no header");
  return table;
}

std::optional<std::size_t> CsvTable::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t CsvTable::column(std::string_view name) const {
  if (auto c = find_column(name)) return *c;
  throw FormatError("CSV is missing column '" + std::string(name) + "'");
}

std::string_view CsvTable::field(std::size_t row, std::size_t col) const { return rows_.at(row).at(col); }

std::optional<double> CsvTable::number(std::size_t row, std::size_t col) const {
  std::string_view f = field(row, col);
  if (f.empty() || f == "nan" || f == "NaN" || f == "NA") return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
  if (ec != std::errc() || ptr != f.data() + f.size())
    throw FormatError("CSV field '" + std::string(f) + "' in column '" + header_.at(col) + "' is not numeric");
  return value;
}

double CsvTable::required_number(std::size_t row, std::size_t col) const {
  if (auto v = number(row, col)) return *v;
  throw FormatError("CSV row " + std::to_string(row + 1) + " has an empty '" + header_.at(col) + "' field");
}

}  // namespace semloc
