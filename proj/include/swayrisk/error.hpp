#pragma once

#include <stdexcept>
#include <string>

namespace swayrisk {

// Mirrors swr_status in the C header; keep values in sync.
enum class ErrorCode : int {
  InvalidInput = 1,
  InsufficientData = 2,
  InvalidCovariance = 3,
  InvalidSchedule = 4,
  Gap = 5,
  Schema = 6,
  Shape = 7,
  NanPayload = 8,
  UndefinedRatio = 9,
  Io = 10,
  Internal = 11,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

const char* to_string(ErrorCode code) noexcept;

}  // namespace swayrisk
