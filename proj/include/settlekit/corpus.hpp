#pragma once

// Document model, text extraction, normalization and sentence splitting.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "settlekit/text.hpp"

namespace settlekit::corpus {

enum class SourceKind { Standard, Book, Website };

/// Lifecycle ordering: Ingested < Extracted < Filtered < Deduped. Rejected is
/// terminal and may follow any of them.
enum class DocStatus { Ingested, Extracted, Filtered, Deduped, Rejected };

std::string_view to_string(SourceKind k);
std::string_view to_string(DocStatus s);
SourceKind parse_source_kind(std::string_view s);
DocStatus parse_doc_status(std::string_view s);

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Document {
  std::string id;
  SourceKind source_kind = SourceKind::Website;
  std::string source_path;
  std::optional<std::string> title;
  std::string raw_text;
  std::optional<std::string> clean_text;
  DocStatus status = DocStatus::Ingested;
  std::string reject_reason;  // non-empty iff status == Rejected
  std::uint64_t ingest_order = 0;
  std::size_t replacement_count = 0;  // not persisted in the store

  bool rejected() const { return status == DocStatus::Rejected; }
};

struct Sentence {
  std::string doc_id;
  std::size_t index = 0;
  std::string text;
  std::string normalized;
};

/// Content-addressed id: SHA-256 over (source kind, normalized clean text)
/// once extracted, otherwise over (source kind, raw text).
std::string document_id(SourceKind kind, std::string_view content);

/// Throws CorpusError describing the first violated Document invariant.
void check_invariants(const Document& doc);

/// Single-writer document collection; assigns ingest_order.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Document> docs);

  /// Reads `path` as lossy UTF-8 and appends a Document. A file with no
  /// non-whitespace content is appended as Rejected("empty").
  /// Throws CorpusError when the file is unreadable.
  const Document& ingest(const std::filesystem::path& path, SourceKind kind);

  /// In-memory variant of ingest(); `bytes` is decoded like a file.
  const Document& ingest_bytes(std::string_view bytes, SourceKind kind, std::string source_path);

  const std::vector<Document>& documents() const { return docs_; }
  std::vector<Document>& documents() { return docs_; }
  std::uint64_t last_order() const { return last_order_; }

 private:
  std::vector<Document> docs_;
  std::uint64_t last_order_ = 0;
};

/// Strips markup, drops table/image/script/style/head elements wholesale,
/// decodes common character entities, removes URL tokens and collapses
/// whitespace. Requires status Ingested; yields Extracted, or
/// Rejected("no text content") when nothing survives.
Document extract_text(const Document& doc);

/// The extraction rules applied to a bare string.
std::string extract_plain(std::string_view raw);

/// <title> content of an HTML document, if any.
std::optional<std::string> html_title(std::string_view raw);

using text::normalize;

/// Rule-based segmentation at . ! ? and 。！？；. Western terminators end a
/// sentence only when followed by whitespace, end of text or a CJK character.
std::vector<std::string> split_text(std::string_view clean);

/// Requires status Extracted or later.
std::vector<Sentence> split_sentences(const Document& doc);

// Corpus store: one JSON object per line, fields in fixed order.
nlohmann::ordered_json to_json(const Document& doc);
Document document_from_json(const nlohmann::json& j);
void write_store(const std::filesystem::path& path, const std::vector<Document>& docs);
std::vector<Document> read_store(const std::filesystem::path& path);

}  // namespace settlekit::corpus
