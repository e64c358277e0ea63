#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace potlatch {

enum class ErrorCode {
  EvenTorusSide,
  InvalidGraph,
  DisconnectedGraph,
  PeriodicChain,
  NonStochasticRow,
  NonReversible,
  NoConvergence,
  EigenSolverFailure,
  NegativeMass,
  HorizonExceeded,
  MemoryCapExceeded,
  NotATorus,
  DimensionMismatch,
  GridTooCoarse,
  UnstableStep,
  NonPositiveMean,
  EmptySample,
  HorizonTooShort,
  TailTooFat,
  ConfigInvalid,
};

std::string_view to_string(ErrorCode code);

/// All failures raised by the library carry one of the codes above so callers
/// (and tests) can branch on the failure kind rather than on message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace potlatch
