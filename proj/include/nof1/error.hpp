#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nof1 {

enum class ErrorCode {
  kInvalidArgument,   // malformed input or violated precondition
  kValidation,        // a domain record failed validation
  kNotFound,
  kFailedPrecondition,
  kRefused,           // privacy budget or consent refusal
  kAuthentication,    // AEAD tag mismatch
  kCorruptLog,
  kUnsupported,
  kInternal,
};

std::string_view error_code_name(ErrorCode code);

// Engine-wide exception. `field` names the offending input path when known,
// e.g. "record.pain" or "covariates.age".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string field = {})
      : std::runtime_error(std::move(message)),
        code_(code),
        field_(std::move(field)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

[[noreturn]] inline void fail(ErrorCode code, std::string message,
                              std::string field = {}) {
  throw Error(code, std::move(message), std::move(field));
}

inline void require(bool ok, ErrorCode code, std::string_view message,
                    std::string_view field = {}) {
  if (!ok) throw Error(code, std::string(message), std::string(field));
}

}  // namespace nof1
