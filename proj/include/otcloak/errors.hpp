#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace otcloak {

/// Base class of every error raised by the library. `kind()` is a stable,
/// machine-readable tag used by the CLI for structured error output.
class Error : public std::runtime_error {
 public:
  Error(std::string_view kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  std::string_view kind() const noexcept { return kind_; }

 private:
  std::string_view kind_;
};

#define OTCLOAK_DEFINE_ERROR(Name)                                    \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

OTCLOAK_DEFINE_ERROR(NodeNotFound);
OTCLOAK_DEFINE_ERROR(ConstraintViolation);
OTCLOAK_DEFINE_ERROR(NotNeighbor);
OTCLOAK_DEFINE_ERROR(EmptyNeighborhood);
OTCLOAK_DEFINE_ERROR(InvalidCost);
OTCLOAK_DEFINE_ERROR(NumericalFailure);
OTCLOAK_DEFINE_ERROR(ShapeError);
OTCLOAK_DEFINE_ERROR(FormatError);
OTCLOAK_DEFINE_ERROR(EmptyPool);
OTCLOAK_DEFINE_ERROR(EmptyTrainingSet);
OTCLOAK_DEFINE_ERROR(DegenerateSplit);
OTCLOAK_DEFINE_ERROR(InvalidParams);
OTCLOAK_DEFINE_ERROR(DanglingEdge);

#undef OTCLOAK_DEFINE_ERROR

/// Input-file parse failure; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error("ParseError", "line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace otcloak
