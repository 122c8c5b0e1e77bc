#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace corpstat {

struct ByteSpan {
  std::uint64_t start = 0;
  std::uint64_t end = 0;

  std::uint64_t size() const noexcept { return end - start; }
  bool operator==(const ByteSpan&) const = default;
};

struct Document {
  std::string doc_id;  // "<file-basename>#<ordinal>"
  std::filesystem::path source_file;
  std::size_t ordinal = 0;
  ByteSpan byte_span;  // region strictly between the opening and closing tag
  std::size_t line_count = 0;
  bool truncated = false;  // opening tag never closed
  // Held inline only below the splitter's threshold; otherwise re-read from
  // source_file on demand (see Corpus::text).
  std::optional<std::string> text;
};

struct SplitOptions {
  std::string open_tag = "<DOC>";
  std::string close_tag = "</DOC>";
  // Documents longer than this keep no inline copy of their text.
  std::size_t inline_text_limit = 64 * 1024;
};

struct SplitResult {
  std::vector<Document> documents;
  std::vector<std::string> warnings;
};

// Content lines in a document body. The newline that directly follows the
// opening tag does not start a line; a trailing unterminated fragment does.
std::size_t count_lines(std::string_view body) noexcept;

// One document per opening tag, in file order. Text outside documents is
// ignored. Tag matching is literal and case-sensitive.
SplitResult split_documents(std::string_view raw_text,
                            const std::filesystem::path& source_file,
                            const SplitOptions& options = {});

std::string make_doc_id(const std::filesystem::path& source_file, std::size_t ordinal);

class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<std::filesystem::path> files, std::vector<Document> documents,
         std::vector<std::string> warnings = {});

  const std::string& corpus_id() const noexcept { return corpus_id_; }
  const std::vector<std::filesystem::path>& files() const noexcept { return files_; }
  const std::vector<Document>& documents() const noexcept { return documents_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  std::size_t total_count() const noexcept { return documents_.size(); }

  // Throws kNotFound for an unknown id.
  const Document& find(std::string_view doc_id) const;

  // The document body: inline copy if held, otherwise read from disk via the
  // byte span. Thread-safe; the corpus itself is immutable.
  std::string text(const Document& doc) const;

  // At most `max_bytes` of the body (0 means no limit).
  std::string text_prefix(const Document& doc, std::size_t max_bytes) const;

 private:
  std::string corpus_id_;
  std::vector<std::filesystem::path> files_;
  std::vector<Document> documents_;
  std::vector<std::string> warnings_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Reads and splits every file in order. Directories are expanded to their
// regular files in lexicographic order. Throws kIo naming an unreadable
// file, kConfig when two files share a basename (doc ids would collide),
// and kInvalidArgument when no documents are found.
Corpus ingest_corpus(const std::vector<std::filesystem::path>& inputs,
                     const SplitOptions& options = {});

// Index form: files, doc ids, spans, line counts. No document text.
nlohmann::json to_json(const Corpus& corpus);
Corpus corpus_from_json(const nlohmann::json& j);

// First `max_lines` lines of a body, plus whether anything was cut.
struct Excerpt {
  std::string head;
  bool has_more = false;
};
Excerpt first_lines(std::string_view body, std::size_t max_lines);

// Body text made safe for JSON/terminal output: invalid UTF-8 sequences are
// replaced with U+FFFD.
std::string sanitize_text(std::string_view raw);

}  // namespace corpstat
