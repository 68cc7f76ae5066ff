#pragma once

#include <stdexcept>
#include <string>

namespace afdi {

// Mirrors afdi_status in afdi.h; values must stay in sync.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kOutOfRange,
  kCapacity,
  kInvalidModel,
  kInput,
  kTraining,
  kZeroLikelihood,
  kImpossibleEvidence,
  kLoad,
  kUndefinedMetric,
  kSequencing,
  kIncompleteWindow,
  kLookup,
  kScenario,
  kAlignment,
  kIo,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace afdi
