#include "corpstat/errors.hpp"

#include <sstream>

namespace corpstat {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kState: return "state";
    case ErrorCode::kPending: return "pending_judgments";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kDegenerate: return "degenerate";
  }
  return "unknown";
}

namespace {

std::string pending_message(const std::vector<std::int64_t>& pending) {
  std::ostringstream os;
  os << pending.size() << " draw(s) awaiting judgment:";
  for (auto id : pending) os << ' ' << id;
  return os.str();
}

}  // namespace

PendingJudgmentsError::PendingJudgmentsError(std::vector<std::int64_t> pending)
    : Error(ErrorCode::kPending, pending_message(pending)),
      pending_(std::move(pending)) {}

}  // namespace corpstat
