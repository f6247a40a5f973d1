#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace semloc {

/// Minimal comma-separated table with a header row. Fields are unquoted.
class CsvTable {
 public:
  static CsvTable parse(std::string_view text);

  [[nodiscard]] const std::vector<std::string>& header() const noexcept { return header_; }
  [[nodiscard]] std::size_t rows() const noexcept { return rows_.size(); }
  /// Column index by name; throws FormatError when missing.
  [[nodiscard]] std::size_t column(std::string_view name) const;
  [[nodiscard]] std::optional<std::size_t> find_column(std::string_view name) const;

  [[nodiscard]] std::string_view field(std::size_t row, std::size_t col) const;
  /// Parses a numeric field; empty or "nan" yields std::nullopt.
  [[nodiscard]] std::optional<double> number(std::size_t row, std::size_t col) const;
  [[nodiscard]] double required_number(std::size_t row, std::size_t col) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace semloc
