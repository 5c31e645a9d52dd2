#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bfctl {

enum class ErrorCode {
  G2Zero,
  MixedBatchUnsupported,
  MalformedPmf,
  InvalidParameter,
  DivisionDomain,
  PreconditionUnmet,
  EvalDomain,
  Unstable,
  NearCritical,
  RootCountMismatch,
  BoundaryRoot,
  SingularSystem,
  UnknownOutOfRange,
  NormalizationFailure,
  InversionUnstable,
  ZeroArrivalDelay,
  NoConvergence,
  UnknownScenario,
  ConfigParse,
  IoFailure,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every engine failure; `code()` is stable and used for
/// the CLI's machine-readable error output.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct Violation {
  ErrorCode code;
  std::string message;
};

/// Rejection carrying every violated invariant of a model configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  std::vector<Violation> violations_;
};

/// Thrown by the solvers when Algorithm-style stability fails.
class UnstableError : public Error {
 public:
  UnstableError(double r0, double load);
  double r0() const noexcept { return r0_; }
  double load() const noexcept { return load_; }

 private:
  double r0_;
  double load_;
};

}  // namespace bfctl
