#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mapsem {

enum class ErrorCode {
  kNonMonotonicTime,
  kOutOfRangeField,
  kTooShort,
  kDegenerateOrientation,
  kEmptySeries,
  kEmptyNetwork,
  kInsufficientTraces,
  kInvalidScenario,
  kProvenanceMismatch,
  kParse,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying one of the pipeline's named failure kinds.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mapsem
