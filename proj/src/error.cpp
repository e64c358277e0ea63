#include "potlatch/error.hpp"

namespace potlatch {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EvenTorusSide: return "EvenTorusSide";
    case ErrorCode::InvalidGraph: return "InvalidGraph";
    case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::PeriodicChain: return "PeriodicChain";
    case ErrorCode::NonStochasticRow: return "NonStochasticRow";
    case ErrorCode::NonReversible: return "NonReversible";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::EigenSolverFailure: return "EigenSolverFailure";
    case ErrorCode::NegativeMass: return "NegativeMass";
    case ErrorCode::HorizonExceeded: return "HorizonExceeded";
    case ErrorCode::MemoryCapExceeded: return "MemoryCapExceeded";
    case ErrorCode::NotATorus: return "NotATorus";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::UnstableStep: return "UnstableStep";
    case ErrorCode::NonPositiveMean: return "NonPositiveMean";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::HorizonTooShort: return "HorizonTooShort";
    case ErrorCode::TailTooFat: return "TailTooFat";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

}  // namespace potlatch
