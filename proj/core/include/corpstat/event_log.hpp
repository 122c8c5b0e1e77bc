#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace corpstat {

// Advisory exclusive lock on a file (flock). Serializes writers across
// processes: the CLI and the HTTP server take the same lock.
class FileLock {
 public:
  explicit FileLock(const std::filesystem::path& path);
  ~FileLock();
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

// Append-only JSON-lines file. Lines are never rewritten; readers tail the
// file from the last offset they consumed.
class EventLog {
 public:
  explicit EventLog(std::filesystem::path path);

  const std::filesystem::path& path() const noexcept { return path_; }

  // Events appended since the previous call (whole lines only).
  std::vector<nlohmann::json> read_new();

  // Writes each event as one line and flushes. Callers hold the lock.
  void append(const std::vector<nlohmann::json>& events);

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::filesystem::path path_;
  std::uint64_t offset_ = 0;
};

// Writes via a sibling temporary file and rename, so readers never observe
// a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
nlohmann::json read_json_file(const std::filesystem::path& path);

// JSON text with invalid UTF-8 replaced rather than rejected.
std::string dump_json(const nlohmann::json& j, int indent = -1);

}  // namespace corpstat
