#ifndef TIMECSL_ERRORS_HPP
#define TIMECSL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace timecsl {

// Base for every error raised by the library. `code()` is a stable
// machine-readable tag used by the CLI exit mapping and the HTTP layer.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config_error", what) {}
};

// Series shorter than a shapelet window.
class LengthError : public Error {
 public:
  explicit LengthError(const std::string& what) : Error("length_error", what) {}
};

// Caller violated an operation precondition (shape mismatch, bad argument).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error("contract_error", what) {}
};

// Invalid or unreadable input data. Carries a 1-based source location when
// one is known (line 0 means "no location").
class DataError : public Error {
 public:
  DataError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : Error("data_error", format(what, line, column)), line_(line), column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& what, std::size_t line, std::size_t column) {
    if (line == 0) return what;
    std::string loc = "line " + std::to_string(line);
    if (column != 0) loc += ", column " + std::to_string(column);
    return loc + ": " + what;
  }
  std::size_t line_;
  std::size_t column_;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, long step)
      : Error("training_error", what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace timecsl

#endif  // TIMECSL_ERRORS_HPP
