#pragma once

#include <stdexcept>
#include <string>

namespace nnquad {

enum class ErrorCode {
  kSingularAttitude,
  kEnvelopeViolation,
  kModelContractViolation,
  kDimensionMismatch,
  kDegenerateData,
  kMalformedModelFile,
  kQpNumericalFailure,
  kRiccatiDiverged,
  kLengthMismatch,
  kConfigError,
  kIoError,
  kInvalidArgument,
};

const char* ErrorCodeName(ErrorCode code);

// Single exception type for the library; the code says which contract broke.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace nnquad
