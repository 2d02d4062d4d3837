#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace microkappa {

enum class ErrorKind {
  InvalidArgument,
  Io,
  Format,
  FailedToConverge,
  DegenerateInput,
  ZeroSnapshot,
  IllConditioned,
  NoConvergence,
  NonFiniteField,
  HTooLarge,
  ConstantFeature,
  Diverged,
  EmptyDataset,
  ResolutionMismatch,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Format: return "Format";
    case ErrorKind::FailedToConverge: return "FailedToConverge";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::ZeroSnapshot: return "ZeroSnapshot";
    case ErrorKind::IllConditioned: return "IllConditioned";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::NonFiniteField: return "NonFiniteField";
    case ErrorKind::HTooLarge: return "HTooLarge";
    case ErrorKind::ConstantFeature: return "ConstantFeature";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::ResolutionMismatch: return "ResolutionMismatch";
  }
  return "Unknown";
}

/// Errors that come from the numerics rather than from bad input or files.
constexpr bool is_numerical(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::FailedToConverge:
    case ErrorKind::DegenerateInput:
    case ErrorKind::ZeroSnapshot:
    case ErrorKind::IllConditioned:
    case ErrorKind::NoConvergence:
    case ErrorKind::NonFiniteField:
    case ErrorKind::ConstantFeature:
    case ErrorKind::Diverged:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace microkappa
