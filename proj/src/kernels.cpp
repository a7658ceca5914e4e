#include "settlekit/kernels.hpp"

#include <omp.h>

#include <cmath>
#include <functional>

#include "settlekit/digest.hpp"
#include "settlekit/text.hpp"

namespace settlekit::kernels {

namespace {

corpus::Document extract_one(const corpus::Document& d) {
  return d.status == corpus::DocStatus::Ingested ? corpus::extract_text(d) : d;
}

ArticleKey key_one(const corpus::Document& d) {
  ArticleKey k;
  k.normalized = text::normalize(d.clean_text.value_or(std::string{}));
  k.digest = sha256_hex(k.normalized);
  return k;
}

std::vector<SentenceRow> rows_one(const corpus::Document& d) {
  std::vector<SentenceRow> rows;
  if (!d.clean_text) return rows;
  for (auto& s : corpus::split_text(*d.clean_text)) {
    SentenceRow r;
    r.normalized = text::normalize(s);
    r.length = text::codepoint_count(r.normalized);
    r.hash = std::hash<std::string_view>{}(r.normalized);
    r.text = std::move(s);
    rows.push_back(std::move(r));
  }
  return rows;
}

double score_one(const std::map<std::string, std::uint32_t>& terms, const std::map<std::string, double>& query) {
  double s = 0.0;
  for (const auto& [term, idf] : query) {
    const auto it = terms.find(term);
    if (it == terms.end() || it->second == 0) continue;
    s += (1.0 + std::log(static_cast<double>(it->second))) * idf;
  }
  return s;
}

std::map<std::string, std::uint32_t> count_one(const std::string& text_in) {
  std::map<std::string, std::uint32_t> counts;
  for (auto& t : text::tokenize_terms(text::normalize(text_in))) ++counts[std::move(t)];
  return counts;
}

// Applies `f` to each input index, writing result slot i only.
template <typename Out, typename In, typename F>
std::vector<Out> map_parallel(const std::vector<In>& in, F f) {
  std::vector<Out> out(in.size());
  const auto n = static_cast<std::int64_t>(in.size());
  // Exceptions must not escape the parallel region; capture the first.
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = f(in[static_cast<std::size_t>(i)]);
    } catch (...) {
#pragma omp critical(settlekit_kernel_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

template <typename Out, typename In, typename F>
std::vector<Out> map_serial(const std::vector<In>& in, F f) {
  std::vector<Out> out;
  out.reserve(in.size());
  for (const auto& x : in) out.push_back(f(x));
  return out;
}

}  // namespace

void set_worker_count(int workers) {
  if (workers > 0) omp_set_num_threads(workers);
}

int worker_count() { return omp_get_max_threads(); }

std::vector<corpus::Document> extract_batch(const std::vector<corpus::Document>& docs) {
  return map_parallel<corpus::Document>(docs, extract_one);
}

std::vector<corpus::Document> extract_batch_serial(const std::vector<corpus::Document>& docs) {
  return map_serial<corpus::Document>(docs, extract_one);
}

std::vector<ArticleKey> article_keys(const std::vector<corpus::Document>& docs) {
  return map_parallel<ArticleKey>(docs, key_one);
}

std::vector<ArticleKey> article_keys_serial(const std::vector<corpus::Document>& docs) {
  return map_serial<ArticleKey>(docs, key_one);
}

std::vector<std::vector<SentenceRow>> sentence_rows(const std::vector<corpus::Document>& docs) {
  return map_parallel<std::vector<SentenceRow>>(docs, rows_one);
}

std::vector<std::vector<SentenceRow>> sentence_rows_serial(const std::vector<corpus::Document>& docs) {
  return map_serial<std::vector<SentenceRow>>(docs, rows_one);
}

std::vector<double> score_chunks(const std::vector<const std::map<std::string, std::uint32_t>*>& chunk_terms,
                                 const std::map<std::string, double>& query_weights) {
  std::vector<double> scores(chunk_terms.size(), 0.0);
  const auto n = static_cast<std::int64_t>(chunk_terms.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    scores[static_cast<std::size_t>(i)] = score_one(*chunk_terms[static_cast<std::size_t>(i)], query_weights);
  }
  return scores;
}

std::vector<double> score_chunks_serial(
    const std::vector<const std::map<std::string, std::uint32_t>*>& chunk_terms,
    const std::map<std::string, double>& query_weights) {
  std::vector<double> scores;
  scores.reserve(chunk_terms.size());
  for (const auto* t : chunk_terms) scores.push_back(score_one(*t, query_weights));
  return scores;
}

std::vector<std::map<std::string, std::uint32_t>> term_counts(const std::vector<std::string>& texts) {
  return map_parallel<std::map<std::string, std::uint32_t>>(texts, count_one);
}

std::vector<std::map<std::string, std::uint32_t>> term_counts_serial(const std::vector<std::string>& texts) {
  return map_serial<std::map<std::string, std::uint32_t>>(texts, count_one);
}

}  // namespace settlekit::kernels
