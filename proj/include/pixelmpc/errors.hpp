#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pixelmpc {

enum class ErrorCode {
  InvalidArgument,
  DegenerateProjection,
  IntegrationFailure,
  NumericalFailure,
  CorruptFile,
  TrainingFailure,
  OptimizerFailure,
  ConfigurationError,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Base exception. Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& w) : Error(ErrorCode::InvalidArgument, w) {}
};
struct DegenerateProjection : Error {
  explicit DegenerateProjection(const std::string& w) : Error(ErrorCode::DegenerateProjection, w) {}
};
struct IntegrationFailure : Error {
  explicit IntegrationFailure(const std::string& w) : Error(ErrorCode::IntegrationFailure, w) {}
};
struct NumericalFailure : Error {
  explicit NumericalFailure(const std::string& w) : Error(ErrorCode::NumericalFailure, w) {}
};
struct CorruptFile : Error {
  explicit CorruptFile(const std::string& w) : Error(ErrorCode::CorruptFile, w) {}
};
struct TrainingFailure : Error {
  TrainingFailure(const std::string& w, int epoch)
      : Error(ErrorCode::TrainingFailure, w), epoch(epoch) {}
  int epoch;
};
struct OptimizerFailure : Error {
  explicit OptimizerFailure(const std::string& w) : Error(ErrorCode::OptimizerFailure, w) {}
};
struct ConfigurationError : Error {
  explicit ConfigurationError(const std::string& w) : Error(ErrorCode::ConfigurationError, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorCode::IoError, w) {}
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::DegenerateProjection: return "degenerate-projection";
    case ErrorCode::IntegrationFailure: return "integration-failure";
    case ErrorCode::NumericalFailure: return "numerical-failure";
    case ErrorCode::CorruptFile: return "corrupt-file";
    case ErrorCode::TrainingFailure: return "training-failure";
    case ErrorCode::OptimizerFailure: return "optimizer-failure";
    case ErrorCode::ConfigurationError: return "configuration-error";
    case ErrorCode::IoError: return "io-error";
  }
  return "unknown";
}

}  // namespace pixelmpc
