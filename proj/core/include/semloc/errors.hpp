#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace semloc {

// Every error raised by the library carries a stable machine-readable kind so
// the CLI can report it as JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  [[nodiscard]] std::string_view kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define SEMLOC_DEFINE_ERROR(Name, kind_string)                      \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& message) : Error(kind_string, message) {} \
  }

SEMLOC_DEFINE_ERROR(LookupError, "lookup");
SEMLOC_DEFINE_ERROR(DomainError, "domain");
SEMLOC_DEFINE_ERROR(TopologyError, "topology");
SEMLOC_DEFINE_ERROR(InvalidGraphError, "invalid_graph");
SEMLOC_DEFINE_ERROR(ReferentialError, "referential");
SEMLOC_DEFINE_ERROR(EmptyMapError, "empty_map");
SEMLOC_DEFINE_ERROR(ConfigError, "config");
SEMLOC_DEFINE_ERROR(FitError, "fit");
SEMLOC_DEFINE_ERROR(DivergenceError, "divergence");
SEMLOC_DEFINE_ERROR(IoError, "io");
SEMLOC_DEFINE_ERROR(FormatError, "format");

#undef SEMLOC_DEFINE_ERROR

// Malformed XML or text input; keeps the position of the offending token.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, long line, long column)
      : Error("parse", message + " (line " + std::to_string(line) + ", column " +
                           std::to_string(column) + ")"),
        line_(line),
        column_(column) {}

  [[nodiscard]] long line() const noexcept { return line_; }
  [[nodiscard]] long column() const noexcept { return column_; }

 private:
  long line_;
  long column_;
};

}  // namespace semloc
