#include "settlekit/cleanse.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "settlekit/kernels.hpp"
#include "settlekit/text.hpp"

namespace settlekit::cleanse {

using corpus::DocStatus;
using corpus::Document;

namespace {

bool token_char_at(std::string_view s, std::size_t byte_pos, bool before) {
  // Code point adjacent to a match boundary: the one ending at byte_pos
  // (before) or starting at byte_pos (after).
  if (before) {
    if (byte_pos == 0) return false;
    std::size_t b = byte_pos - 1;
    while (b > 0 && (static_cast<unsigned char>(s[b]) & 0xC0) == 0x80) --b;
    const std::u32string u = text::to_u32(s.substr(b, byte_pos - b));
    return !u.empty() && text::is_alnum(u.front());
  }
  if (byte_pos >= s.size()) return false;
  std::size_t e = byte_pos + 1;
  while (e < s.size() && (static_cast<unsigned char>(s[e]) & 0xC0) == 0x80) ++e;
  const std::u32string u = text::to_u32(s.substr(byte_pos, e - byte_pos));
  return !u.empty() && text::is_alnum(u.front());
}

bool matches(std::string_view hay, const std::string& term, MatchMode mode) {
  std::size_t pos = hay.find(term);
  if (mode == MatchMode::Substring) return pos != std::string_view::npos;
  while (pos != std::string_view::npos) {
    if (!token_char_at(hay, pos, true) && !token_char_at(hay, pos + term.size(), false)) return true;
    pos = hay.find(term, pos + 1);
  }
  return false;
}

void require_status(const Document& d, std::initializer_list<DocStatus> allowed, std::string_view op) {
  if (std::find(allowed.begin(), allowed.end(), d.status) == allowed.end()) {
    throw CleanseError(std::string(op) + ": document " + d.id + " has status " +
                       std::string(corpus::to_string(d.status)));
  }
}

// Positions of `docs` sorted by ingest_order.
std::vector<std::size_t> ingest_sequence(const std::vector<Document>& docs) {
  std::vector<std::size_t> seq(docs.size());
  std::iota(seq.begin(), seq.end(), std::size_t{0});
  std::stable_sort(seq.begin(), seq.end(),
                   [&](std::size_t a, std::size_t b) { return docs[a].ingest_order < docs[b].ingest_order; });
  return seq;
}

std::unordered_set<std::u32string> shingles(std::string_view s, std::size_t k) {
  const std::u32string u = text::to_u32(s);
  std::unordered_set<std::u32string> out;
  if (u.size() <= k) {
    out.insert(u);
    return out;
  }
  for (std::size_t i = 0; i + k <= u.size(); ++i) out.insert(u.substr(i, k));
  return out;
}

}  // namespace

std::string_view to_string(MatchMode m) { return m == MatchMode::Substring ? "substring" : "whole-token"; }

MatchMode parse_match_mode(std::string_view s) {
  if (s == "substring") return MatchMode::Substring;
  if (s == "whole-token" || s == "whole_token" || s == "wholetoken") return MatchMode::WholeToken;
  throw CleanseError("unknown match mode: " + std::string(s));
}

Lexicon Lexicon::load(const std::filesystem::path& path, MatchMode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CleanseError("cannot read lexicon " + path.string());
  Lexicon lex(mode);
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = text::trim(text::decode_utf8_lossy(line).text);
    if (t.empty() || t.front() == '#') continue;
    lex.add(t);
  }
  return lex;
}

Lexicon Lexicon::from_terms(const std::vector<std::string>& terms, MatchMode mode) {
  Lexicon lex(mode);
  for (const auto& t : terms) lex.add(t);
  return lex;
}

void Lexicon::add(std::string_view term) {
  std::string n = text::normalize(term);
  if (!n.empty()) terms_.insert(std::move(n));
}

std::optional<std::string> Lexicon::first_match(std::string_view normalized) const {
  for (const auto& t : terms_) {
    if (matches(normalized, t, mode_)) return t;
  }
  return std::nullopt;
}

Document filter_sensitive(const Document& doc, const Lexicon& lexicon) {
  require_status(doc, {DocStatus::Extracted}, "filter_sensitive");
  Document out = doc;
  if (auto hit = lexicon.first_match(text::normalize(*doc.clean_text))) {
    out.status = DocStatus::Rejected;
    out.reject_reason = "sensitive:" + *hit;
  } else {
    out.status = DocStatus::Filtered;
  }
  return out;
}

nlohmann::ordered_json DedupReport::to_json() const {
  nlohmann::ordered_json j;
  j["articles_in"] = articles_in;
  j["articles_removed"] = articles_removed;
  j["sentences_removed"] = sentences_removed;
  auto log = nlohmann::ordered_json::array();
  for (const auto& r : removal_log) {
    nlohmann::ordered_json e;
    e["doc_id"] = r.doc_id;
    e["doc_order"] = r.doc_order;
    e["sentence_index"] = r.sentence_index ? nlohmann::ordered_json(*r.sentence_index) : "ARTICLE";
    e["duplicate_of"] = r.duplicate_of;
    e["duplicate_of_order"] = r.duplicate_of_order;
    e["duplicate_of_sentence"] =
        r.duplicate_of_sentence ? nlohmann::ordered_json(*r.duplicate_of_sentence) : nlohmann::ordered_json(nullptr);
    log.push_back(std::move(e));
  }
  j["removal_log"] = std::move(log);
  return j;
}

double shingle_jaccard(std::string_view a, std::string_view b, std::size_t shingle) {
  const auto sa = shingles(a, std::max<std::size_t>(shingle, 1));
  const auto sb = shingles(b, std::max<std::size_t>(shingle, 1));
  std::size_t inter = 0;
  for (const auto& s : sa) inter += sb.count(s);
  const std::size_t uni = sa.size() + sb.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

DedupResult dedup_articles(const std::vector<Document>& docs, const NearDupOptions& near_dup) {
  for (const auto& d : docs) require_status(d, {DocStatus::Filtered, DocStatus::Deduped}, "dedup_articles");

  const std::vector<kernels::ArticleKey> keys = kernels::article_keys(docs);

  // Sequential reduce over ingest order; the survivor index is single-writer.
  std::unordered_map<std::string, std::size_t> first_by_digest;
  std::vector<std::optional<std::size_t>> duplicate_of(docs.size());
  std::vector<std::size_t> kept_in_order;
  for (std::size_t pos : ingest_sequence(docs)) {
    const auto [it, inserted] = first_by_digest.emplace(keys[pos].digest, pos);
    if (!inserted && keys[it->second].normalized == keys[pos].normalized) {
      duplicate_of[pos] = it->second;
      continue;
    }
    if (near_dup.enabled) {
      for (std::size_t prev : kept_in_order) {
        if (shingle_jaccard(keys[prev].normalized, keys[pos].normalized, near_dup.shingle) >= near_dup.threshold) {
          duplicate_of[pos] = prev;
          break;
        }
      }
      if (duplicate_of[pos]) continue;
    }
    kept_in_order.push_back(pos);
  }

  DedupResult result;
  result.report.articles_in = docs.size();
  for (std::size_t pos : ingest_sequence(docs)) {
    if (!duplicate_of[pos]) continue;
    const Document& orig = docs[*duplicate_of[pos]];
    result.report.removal_log.push_back(
        Removal{docs[pos].id, docs[pos].ingest_order, std::nullopt, orig.id, orig.ingest_order, std::nullopt});
  }
  for (std::size_t i = 0; i < docs.size(); ++i) {
    Document d = docs[i];
    if (duplicate_of[i]) {
      d.status = DocStatus::Rejected;
      d.reject_reason = "duplicate:" + docs[*duplicate_of[i]].id;
      result.removed.push_back(std::move(d));
    } else {
      d.status = DocStatus::Deduped;
      result.survivors.push_back(std::move(d));
    }
  }
  result.report.articles_removed = result.removed.size();
  return result;
}

DedupResult dedup_sentences(const std::vector<Document>& docs, std::size_t min_len) {
  for (const auto& d : docs) require_status(d, {DocStatus::Filtered, DocStatus::Deduped}, "dedup_sentences");

  const std::vector<std::vector<kernels::SentenceRow>> rows = kernels::sentence_rows(docs);

  struct Seen {
    std::size_t doc;
    std::size_t sentence;
  };
  std::unordered_map<std::uint64_t, std::vector<Seen>> index;
  std::vector<std::vector<bool>> removed(docs.size());
  DedupResult result;
  result.report.articles_in = docs.size();

  for (std::size_t pos : ingest_sequence(docs)) {
    removed[pos].assign(rows[pos].size(), false);
    for (std::size_t s = 0; s < rows[pos].size(); ++s) {
      const kernels::SentenceRow& row = rows[pos][s];
      if (row.length < min_len) continue;
      auto& bucket = index[row.hash];
      const auto hit = std::find_if(bucket.begin(), bucket.end(), [&](const Seen& seen) {
        return rows[seen.doc][seen.sentence].normalized == row.normalized;
      });
      if (hit == bucket.end()) {
        bucket.push_back(Seen{pos, s});
        continue;
      }
      removed[pos][s] = true;
      result.report.removal_log.push_back(Removal{docs[pos].id, docs[pos].ingest_order, s, docs[hit->doc].id,
                                                  docs[hit->doc].ingest_order, hit->sentence});
    }
  }
  result.report.sentences_removed = result.report.removal_log.size();

  for (std::size_t i = 0; i < docs.size(); ++i) {
    Document d = docs[i];
    d.status = DocStatus::Deduped;
    if (std::find(removed[i].begin(), removed[i].end(), true) != removed[i].end()) {
      std::vector<std::string> kept;
      for (std::size_t s = 0; s < rows[i].size(); ++s) {
        if (!removed[i][s]) kept.push_back(rows[i][s].text);
      }
      d.clean_text = text::join_sentences(kept);
      if (kept.empty()) {
        d.status = DocStatus::Rejected;
        d.reject_reason = "empty after sentence dedup";
        result.removed.push_back(std::move(d));
        continue;
      }
    }
    result.survivors.push_back(std::move(d));
  }
  result.report.articles_removed = result.removed.size();
  return result;
}

}  // namespace settlekit::cleanse
