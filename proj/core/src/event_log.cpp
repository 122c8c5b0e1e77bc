#include "corpstat/event_log.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "corpstat/errors.hpp"

namespace fs = std::filesystem;

namespace corpstat {

FileLock::FileLock(const fs::path& path) {
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    fail(ErrorCode::kIo,
         fmt::format("cannot open lock file {}: {}", path.string(), std::strerror(errno)));
  }
  while (::flock(fd_, LOCK_EX) != 0) {
    if (errno != EINTR) {
      ::close(fd_);
      fail(ErrorCode::kIo, fmt::format("cannot lock {}: {}", path.string(),
                                       std::strerror(errno)));
    }
  }
}

FileLock::~FileLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

EventLog::EventLog(fs::path path) : path_(std::move(path)) {}

std::vector<nlohmann::json> EventLog::read_new() {
  std::vector<nlohmann::json> events;
  std::ifstream in(path_, std::ios::binary);
  if (!in) return events;  // no events yet
  in.seekg(static_cast<std::streamoff>(offset_));
  std::string line;
  while (true) {
    const auto line_start = in.tellg();
    if (!std::getline(in, line)) break;
    if (in.eof()) {
      // Unterminated tail: a writer is mid-append. Leave it for next time.
      offset_ = static_cast<std::uint64_t>(line_start);
      return events;
    }
    offset_ = static_cast<std::uint64_t>(in.tellg());
    if (line.empty()) continue;
    try {
      events.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kConfig, fmt::format("{}: corrupt event at byte {}: {}", path_.string(),
                                           static_cast<long long>(line_start), e.what()));
    }
  }
  return events;
}

void EventLog::append(const std::vector<nlohmann::json>& events) {
  if (events.empty()) return;
  std::string chunk;
  for (const auto& e : events) {
    chunk += dump_json(e);
    chunk += '\n';
  }
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) fail(ErrorCode::kIo, "cannot append to " + path_.string());
  out.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
  out.flush();
  if (!out) fail(ErrorCode::kIo, "write failed on " + path_.string());
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) fail(ErrorCode::kIo, "write failed on " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::kIo, fmt::format("cannot rename {}: {}", tmp.string(), ec.message()));
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string dump_json(const nlohmann::json& j, int indent) {
  return j.dump(indent, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace corpstat
