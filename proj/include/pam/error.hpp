#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pam {

enum class ErrorCode {
  DuplicateEdge,
  SelfLoop,
  Disconnected,
  DegreeBoundExceeded,
  SizeOverflow,
  SizeLimit,
  InvalidInput,
  VertexBudgetExceeded,
  NonExpanding,
  OddTotalDegree,
  MaxAttemptsExceeded,
  PathNotInGraph,
  PreconditionViolated,
  EmptyDomain,
  NoConvergence,
  DomainTooLarge,
  BudgetExceeded,
  StepControlFailure,
  GammaTooSmall,
  InfeasibleBoundary,
  GridTooCoarse,
  NotFound,
  CouplingRegimeViolated,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library. `code()` identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pam
