#pragma once

#include <stdexcept>
#include <string>

namespace nca {

enum class ErrorCode {
  kInvalidArgument = 1,
  kIo,
  kNumeric,
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kDimensionMismatch,
  kOutOfBounds,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace nca
