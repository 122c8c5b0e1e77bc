#include "corpstat/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "corpstat/errors.hpp"
#include "corpstat/hash.hpp"

namespace fs = std::filesystem;

namespace corpstat {

std::size_t count_lines(std::string_view body) noexcept {
  if (!body.empty() && body.front() == '\n') body.remove_prefix(1);
  if (body.empty()) return 0;
  const auto newlines = static_cast<std::size_t>(std::count(body.begin(), body.end(), '\n'));
  return newlines + (body.back() == '\n' ? 0 : 1);
}

std::string make_doc_id(const fs::path& source_file, std::size_t ordinal) {
  return fmt::format("{}#{}", source_file.filename().string(), ordinal);
}

SplitResult split_documents(std::string_view raw, const fs::path& source_file,
                            const SplitOptions& options) {
  if (options.open_tag.empty() || options.close_tag.empty()) {
    fail(ErrorCode::kInvalidArgument, "split: document tags must be non-empty");
  }
  SplitResult result;
  const auto& open = options.open_tag;
  const auto& close = options.close_tag;

  auto emit = [&](std::size_t start, std::size_t end, bool truncated) {
    Document doc;
    doc.ordinal = result.documents.size();
    doc.doc_id = make_doc_id(source_file, doc.ordinal);
    doc.source_file = source_file;
    doc.byte_span = {start, end};
    doc.truncated = truncated;
    const auto body = raw.substr(start, end - start);
    doc.line_count = count_lines(body);
    if (body.size() <= options.inline_text_limit) doc.text = std::string(body);
    result.documents.push_back(std::move(doc));
  };

  std::size_t pos = 0;
  while (pos < raw.size()) {
    const std::size_t next_open = raw.find(open, pos);
    const std::size_t next_close = raw.find(close, pos);
    // Closing tags that precede the next opening tag have no open document.
    if (next_close != std::string_view::npos &&
        (next_open == std::string_view::npos || next_close < next_open)) {
      result.warnings.push_back(fmt::format(
          "{}: closing tag at byte {} with no open document; ignored",
          source_file.string(), next_close));
      pos = next_close + close.size();
      continue;
    }
    if (next_open == std::string_view::npos) break;

    const std::size_t body_start = next_open + open.size();
    const std::size_t body_close = raw.find(close, body_start);
    const std::size_t reopen = raw.find(open, body_start);
    if (body_close != std::string_view::npos &&
        (reopen == std::string_view::npos || body_close < reopen)) {
      emit(body_start, body_close, false);
      pos = body_close + close.size();
      continue;
    }
    const std::size_t body_end = (reopen == std::string_view::npos) ? raw.size() : reopen;
    result.warnings.push_back(fmt::format(
        "{}: document {} opened at byte {} is not closed before {}; kept as truncated",
        source_file.string(), result.documents.size(), next_open,
        reopen == std::string_view::npos ? std::string("end of file")
                                         : fmt::format("byte {}", reopen)));
    emit(body_start, body_end, true);
    pos = body_end;
  }
  return result;
}

// ---------------------------------------------------------------------------

namespace {

std::string compute_corpus_id(const std::vector<Document>& docs) {
  Fnv1a64 h;
  for (const auto& d : docs) {
    h.update(d.doc_id);
    h.update(static_cast<std::uint64_t>(d.byte_span.start));
    h.update(static_cast<std::uint64_t>(d.byte_span.end));
    h.update(static_cast<std::uint64_t>(d.line_count));
  }
  return to_hex(h.value());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot read corpus file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorCode::kIo, "error while reading corpus file " + path.string());
  return std::move(ss).str();
}

std::vector<fs::path> expand_inputs(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> files;
  for (const auto& input : inputs) {
    std::error_code ec;
    if (fs::is_directory(input, ec)) {
      std::vector<fs::path> entries;
      for (const auto& entry : fs::directory_iterator(input)) {
        if (entry.is_regular_file()) entries.push_back(entry.path());
      }
      std::sort(entries.begin(), entries.end());
      files.insert(files.end(), entries.begin(), entries.end());
    } else {
      files.push_back(input);
    }
  }
  return files;
}

}  // namespace

Corpus::Corpus(std::vector<fs::path> files, std::vector<Document> documents,
               std::vector<std::string> warnings)
    : files_(std::move(files)),
      documents_(std::move(documents)),
      warnings_(std::move(warnings)) {
  corpus_id_ = compute_corpus_id(documents_);
  index_.reserve(documents_.size());
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    if (!index_.emplace(documents_[i].doc_id, i).second) {
      fail(ErrorCode::kConfig, "duplicate document id " + documents_[i].doc_id);
    }
  }
}

const Document& Corpus::find(std::string_view doc_id) const {
  const auto it = index_.find(std::string(doc_id));
  if (it == index_.end()) {
    fail(ErrorCode::kNotFound, fmt::format("unknown document '{}'", doc_id));
  }
  return documents_[it->second];
}

std::string Corpus::text(const Document& doc) const { return text_prefix(doc, 0); }

std::string Corpus::text_prefix(const Document& doc, std::size_t max_bytes) const {
  const std::size_t want =
      max_bytes == 0 ? doc.byte_span.size()
                     : std::min<std::size_t>(max_bytes, doc.byte_span.size());
  if (doc.text) return doc.text->substr(0, want);
  std::ifstream in(doc.source_file, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot re-read " + doc.source_file.string());
  in.seekg(static_cast<std::streamoff>(doc.byte_span.start));
  std::string out(want, '\0');
  in.read(out.data(), static_cast<std::streamsize>(want));
  if (static_cast<std::size_t>(in.gcount()) != want) {
    fail(ErrorCode::kIo, fmt::format("{} changed since ingest (short read for {})",
                                     doc.source_file.string(), doc.doc_id));
  }
  return out;
}

Corpus ingest_corpus(const std::vector<fs::path>& inputs, const SplitOptions& options) {
  // Absolute paths keep the index usable from any working directory.
  auto files = expand_inputs(inputs);
  for (auto& f : files) f = fs::absolute(f).lexically_normal();
  std::unordered_map<std::string, fs::path> basenames;
  for (const auto& f : files) {
    auto [it, inserted] = basenames.emplace(f.filename().string(), f);
    if (!inserted) {
      fail(ErrorCode::kConfig, fmt::format("files {} and {} share a basename",
                                           it->second.string(), f.string()));
    }
  }

  std::vector<Document> documents;
  std::vector<std::string> warnings;
  for (const auto& file : files) {
    const std::string raw = read_file(file);
    auto split = split_documents(raw, file, options);
    std::move(split.documents.begin(), split.documents.end(),
              std::back_inserter(documents));
    std::move(split.warnings.begin(), split.warnings.end(),
              std::back_inserter(warnings));
  }
  if (documents.empty()) {
    fail(ErrorCode::kInvalidArgument, "corpus contains no documents");
  }
  return Corpus(files, std::move(documents), std::move(warnings));
}

nlohmann::json to_json(const Corpus& corpus) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["corpus_id"] = corpus.corpus_id();
  auto files = nlohmann::json::array();
  for (const auto& f : corpus.files()) files.push_back(f.string());
  j["files"] = std::move(files);
  j["total_count"] = corpus.total_count();
  auto docs = nlohmann::json::array();
  for (const auto& d : corpus.documents()) {
    nlohmann::json jd = {{"doc_id", d.doc_id},
                         {"source_file", d.source_file.string()},
                         {"ordinal", d.ordinal},
                         {"byte_span", {d.byte_span.start, d.byte_span.end}},
                         {"line_count", d.line_count}};
    if (d.truncated) jd["truncated"] = true;
    docs.push_back(std::move(jd));
  }
  j["documents"] = std::move(docs);
  j["warnings"] = corpus.warnings();
  return j;
}

Corpus corpus_from_json(const nlohmann::json& j) {
  try {
    std::vector<fs::path> files;
    for (const auto& f : j.at("files")) files.emplace_back(f.get<std::string>());
    std::vector<Document> docs;
    for (const auto& jd : j.at("documents")) {
      Document d;
      d.doc_id = jd.at("doc_id").get<std::string>();
      d.source_file = jd.at("source_file").get<std::string>();
      d.ordinal = jd.at("ordinal").get<std::size_t>();
      d.byte_span = {jd.at("byte_span").at(0).get<std::uint64_t>(),
                     jd.at("byte_span").at(1).get<std::uint64_t>()};
      d.line_count = jd.at("line_count").get<std::size_t>();
      d.truncated = jd.value("truncated", false);
      docs.push_back(std::move(d));
    }
    Corpus corpus(std::move(files), std::move(docs),
                  j.value("warnings", std::vector<std::string>{}));
    if (j.contains("corpus_id") && j["corpus_id"].get<std::string>() != corpus.corpus_id()) {
      fail(ErrorCode::kConfig, "corpus index: corpus_id does not match its documents");
    }
    return corpus;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("corpus index: ") + e.what());
  }
}

Excerpt first_lines(std::string_view body, std::size_t max_lines) {
  if (!body.empty() && body.front() == '\n') body.remove_prefix(1);
  std::size_t pos = 0;
  for (std::size_t line = 0; line < max_lines; ++line) {
    const auto nl = body.find('\n', pos);
    if (nl == std::string_view::npos) return {std::string(body), false};
    pos = nl + 1;
  }
  const bool more = body.find_first_not_of(" \t\r\n", pos) != std::string_view::npos;
  return {std::string(body.substr(0, pos)), more};
}

std::string sanitize_text(std::string_view raw) {
  static constexpr std::string_view kReplacement = "\xEF\xBF\xBD";
  std::string out;
  out.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    const auto c = static_cast<unsigned char>(raw[i]);
    std::size_t len = 0;
    if (c < 0x80) len = 1;
    else if ((c & 0xE0) == 0xC0 && c >= 0xC2) len = 2;
    else if ((c & 0xF0) == 0xE0) len = 3;
    else if ((c & 0xF8) == 0xF0 && c <= 0xF4) len = 4;

    bool ok = len > 0 && i + len <= raw.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      ok = (static_cast<unsigned char>(raw[i + k]) & 0xC0) == 0x80;
    }
    if (ok && len == 3) {
      const auto c1 = static_cast<unsigned char>(raw[i + 1]);
      ok = !(c == 0xE0 && c1 < 0xA0) && !(c == 0xED && c1 >= 0xA0);
    }
    if (ok && len == 4) {
      const auto c1 = static_cast<unsigned char>(raw[i + 1]);
      ok = !(c == 0xF0 && c1 < 0x90) && !(c == 0xF4 && c1 >= 0x90);
    }
    if (ok) {
      out.append(raw.substr(i, len));
      i += len;
    } else {
      out.append(kReplacement);
      ++i;
    }
  }
  return out;
}

}  // namespace corpstat
