#pragma once

// Sensitive-word filtering and exact article/sentence deduplication.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "settlekit/corpus.hpp"

namespace settlekit::cleanse {

enum class MatchMode { Substring, WholeToken };

std::string_view to_string(MatchMode m);
MatchMode parse_match_mode(std::string_view s);

class CleanseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Normalized, non-empty sensitive terms.
class Lexicon {
 public:
  explicit Lexicon(MatchMode mode = MatchMode::Substring) : mode_(mode) {}

  /// One term per line; blank lines and lines starting with '#' are ignored.
  static Lexicon load(const std::filesystem::path& path, MatchMode mode);
  static Lexicon from_terms(const std::vector<std::string>& terms, MatchMode mode);

  /// Normalizes `term`; empty terms are ignored.
  void add(std::string_view term);

  /// First term (in sorted order) matching the normalized text.
  std::optional<std::string> first_match(std::string_view normalized) const;

  const std::set<std::string>& terms() const { return terms_; }
  MatchMode mode() const { return mode_; }

 private:
  std::set<std::string> terms_;
  MatchMode mode_;
};

/// Requires status Extracted. Returns Filtered, or Rejected("sensitive:<term>").
/// clean_text is never modified.
corpus::Document filter_sensitive(const corpus::Document& doc, const Lexicon& lexicon);

struct Removal {
  std::string doc_id;
  std::uint64_t doc_order = 0;
  std::optional<std::size_t> sentence_index;  // nullopt: whole article
  std::string duplicate_of;
  std::uint64_t duplicate_of_order = 0;
  std::optional<std::size_t> duplicate_of_sentence;
};

struct DedupReport {
  std::size_t articles_in = 0;
  std::size_t articles_removed = 0;
  std::size_t sentences_removed = 0;
  std::vector<Removal> removal_log;

  nlohmann::ordered_json to_json() const;
};

struct DedupResult {
  std::vector<corpus::Document> survivors;
  /// Documents taken out of the corpus, as Rejected records.
  std::vector<corpus::Document> removed;
  DedupReport report;
};

/// Shingle-Jaccard near-duplicate pass; off by default.
struct NearDupOptions {
  bool enabled = false;
  double threshold = 0.8;
  std::size_t shingle = 5;
};

inline constexpr std::size_t kDefaultMinSentenceLen = 30;

/// Among documents with identical normalized clean text the smallest
/// ingest_order survives. Inputs must be Filtered (or already Deduped).
/// Survivors keep input order and become Deduped.
DedupResult dedup_articles(const std::vector<corpus::Document>& docs, const NearDupOptions& near_dup = {});

/// First-occurrence-wins sentence dedup in (ingest_order, sentence index)
/// order, across and within documents. Sentences whose normalized form is
/// shorter than `min_len` code points are never removed. A document left
/// with no sentences is removed as Rejected("empty after sentence dedup").
DedupResult dedup_sentences(const std::vector<corpus::Document>& docs,
                            std::size_t min_len = kDefaultMinSentenceLen);

/// Character-shingle Jaccard similarity of two normalized strings.
double shingle_jaccard(std::string_view a, std::string_view b, std::size_t shingle);

}  // namespace settlekit::cleanse
