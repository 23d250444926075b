// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace iqa {

/// Failure categories shared by the C++ core and the C API status codes.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kConfig = 2,
  kNonFinite = 3,
  kIo = 4,
  kVersionMismatch = 5,
  kUndefinedCorrelation = 6,
  kCriticUnusable = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace iqa
