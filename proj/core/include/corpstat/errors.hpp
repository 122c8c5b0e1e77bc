#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace corpstat {

// Broad failure classes. The CLI maps these to exit codes and the HTTP
// layer maps them to status codes, so keep the list short and stable.
enum class ErrorCode {
  kInvalidArgument,  // precondition violated by the caller
  kIo,               // file missing, unreadable, unwritable
  kConfig,           // malformed rule set, campaign header, etc.
  kValidation,       // user-supplied data (elicited prior points) rejected
  kState,            // campaign state machine violation
  kPending,          // unjudged draws block the request
  kNotFound,         // unknown stratum, draw, or campaign
  kDegenerate,       // numerics collapsed (all-zero density, all A_i = 0)
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised when an operation needs every draw of a phase judged.
class PendingJudgmentsError : public Error {
 public:
  explicit PendingJudgmentsError(std::vector<std::int64_t> pending);

  const std::vector<std::int64_t>& pending_draw_ids() const noexcept {
    return pending_;
  }

 private:
  std::vector<std::int64_t> pending_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace corpstat
