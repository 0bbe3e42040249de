#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace scrm {

enum class ErrorKind {
  MalformedLine,
  UnknownBehavior,
  EmptyDataset,
  SplitTooLarge,
  InvalidDim,
  NonFiniteGradient,
  EmptySplit,
  ConfigMismatch,
  BadConfig,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedLine: return "MalformedLine";
    case ErrorKind::UnknownBehavior: return "UnknownBehavior";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::SplitTooLarge: return "SplitTooLarge";
    case ErrorKind::InvalidDim: return "InvalidDim";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::EmptySplit: return "EmptySplit";
    case ErrorKind::ConfigMismatch: return "ConfigMismatch";
    case ErrorKind::BadConfig: return "BadConfig";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library. `line()` is the 1-based input line
/// for parse errors and 0 otherwise.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::size_t line = 0)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        line_(line) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::size_t line() const noexcept { return line_; }

  /// Bad input and bad configuration map to exit code 2, everything else to 1.
  bool is_input_error() const noexcept {
    switch (kind_) {
      case ErrorKind::MalformedLine:
      case ErrorKind::UnknownBehavior:
      case ErrorKind::EmptyDataset:
      case ErrorKind::SplitTooLarge:
      case ErrorKind::InvalidDim:
      case ErrorKind::EmptySplit:
      case ErrorKind::ConfigMismatch:
      case ErrorKind::BadConfig:
      case ErrorKind::Io:
        return true;
      default:
        return false;
    }
  }

 private:
  ErrorKind kind_;
  std::size_t line_;
};

}  // namespace scrm
