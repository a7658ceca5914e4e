#pragma once

// Data-parallel per-item kernels (OpenMP) and the serial reference
// implementations they are tested against. Every parallel kernel writes only
// to its own output slot; results are identical to the serial version.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "settlekit/corpus.hpp"

namespace settlekit::kernels {

/// Sets the OpenMP team size used by the kernels; 0 keeps the runtime default.
void set_worker_count(int workers);
int worker_count();

/// extract_text() over every Ingested document; others pass through.
std::vector<corpus::Document> extract_batch(const std::vector<corpus::Document>& docs);
std::vector<corpus::Document> extract_batch_serial(const std::vector<corpus::Document>& docs);

struct ArticleKey {
  std::string normalized;
  std::string digest;  // SHA-256 of normalized
};

std::vector<ArticleKey> article_keys(const std::vector<corpus::Document>& docs);
std::vector<ArticleKey> article_keys_serial(const std::vector<corpus::Document>& docs);

struct SentenceRow {
  std::string text;
  std::string normalized;
  std::size_t length = 0;  // code points of normalized
  std::uint64_t hash = 0;  // 64-bit hash of normalized; collisions resolved by comparison
};

std::vector<std::vector<SentenceRow>> sentence_rows(const std::vector<corpus::Document>& docs);
std::vector<std::vector<SentenceRow>> sentence_rows_serial(const std::vector<corpus::Document>& docs);

/// Lexical scoring of every chunk against a query. `chunk_terms[i]` is the
/// term-count map of chunk i; `query_weights` maps each distinct query term
/// to its idf. Score = sum over query terms present of (1 + ln tf) * idf.
std::vector<double> score_chunks(const std::vector<const std::map<std::string, std::uint32_t>*>& chunk_terms,
                                 const std::map<std::string, double>& query_weights);
std::vector<double> score_chunks_serial(
    const std::vector<const std::map<std::string, std::uint32_t>*>& chunk_terms,
    const std::map<std::string, double>& query_weights);

/// Term counts of each text (normalized, then tokenized).
std::vector<std::map<std::string, std::uint32_t>> term_counts(const std::vector<std::string>& texts);
std::vector<std::map<std::string, std::uint32_t>> term_counts_serial(const std::vector<std::string>& texts);

}  // namespace settlekit::kernels
