#pragma once

#include <stdexcept>
#include <string>

namespace smclimits {

enum class ErrorCode {
  kDegenerateWeights,
  kNonFiniteIntegrand,
  kInvalidWeight,
  kInvalidDensity,
  kInvalidOffspringCount,
  kInvalidArgument,
  kPhiNotPositive,
  kAtomicIntegerMass,
  kOptimalKernelUndefined,
  kWeightCollapse,
  kPathSpaceTooLarge,
  kTruthUnavailable,
  kInsufficientData,
  kConfig,
};

/// Exception carrying a machine-checkable code alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace smclimits
