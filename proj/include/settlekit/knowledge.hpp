#pragma once

// Knowledge-graph claim validation and the lexical retrieval index used to
// ground dialogue generation.

#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "settlekit/corpus.hpp"
#include "settlekit/kb_types.hpp"
#include "settlekit/synth.hpp"

namespace settlekit::knowledge {

using kb::KbChunk;
using kb::Triple;
using kb::Verdict;
using kb::VerdictStatus;

class KnowledgeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Normalizes every field; throws KnowledgeError if any becomes empty.
Triple make_triple(std::string_view subject, std::string_view predicate, std::string_view object);

std::string format_triple(const Triple& t);

/// Set of triples plus the functional predicates (≤ 1 object per subject).
/// Built single-writer, then read concurrently.
class KnowledgeGraph {
 public:
  /// Returns false when the triple was already present. Throws
  /// KnowledgeError citing the stored triple on a functional conflict.
  bool insert(const Triple& t);

  /// Throws if stored data already holds two objects for one (subject, predicate).
  void declare_functional(std::string_view predicate);

  bool contains(const Triple& t) const { return triples_.count(t) != 0; }
  bool is_functional(const std::string& predicate) const { return functional_.count(predicate) != 0; }
  /// Stored objects for (subject, predicate).
  const std::set<std::string>* objects(const std::string& subject, const std::string& predicate) const;

  const std::set<Triple>& triples() const { return triples_; }
  const std::set<std::string>& functional_predicates() const { return functional_; }
  std::size_t size() const { return triples_.size(); }

  /// Tab-separated subject/predicate/object per line; '#' comments;
  /// "!functional <predicate>" declarations.
  static KnowledgeGraph load(const std::filesystem::path& path);
  static KnowledgeGraph parse(std::string_view content, const std::string& origin = "<memory>");
  void save(const std::filesystem::path& path) const;

 private:
  std::set<Triple> triples_;
  std::set<std::string> functional_;
  std::map<std::pair<std::string, std::string>, std::set<std::string>> objects_;
};

/// Value-semantics wrapper around KnowledgeGraph::insert.
KnowledgeGraph add_triple(KnowledgeGraph kg, const Triple& t);

/// Supported if stored; Contradicted if the predicate is functional and a
/// different object is stored (witness = that triple); Unknown otherwise.
Verdict validate_claim(const KnowledgeGraph& kg, const Triple& claim);

using ClaimExtractor = std::function<std::vector<Triple>(const synth::QaRecord&)>;

/// Rule-based extraction over the answers' sentences: "X is a Y" / "X is an Y"
/// and "X属于Y" yield (X, is_a, Y).
std::vector<Triple> default_claim_extractor(const synth::QaRecord& rec);

/// Fills kg_verdicts (one per extracted claim) and the contradicted flag.
synth::QaRecord validate_record(const KnowledgeGraph& kg, const synth::QaRecord& rec,
                                const ClaimExtractor& extractor = default_claim_extractor);

/// Validates records concurrently; output order matches input.
std::vector<synth::QaRecord> validate_records(const KnowledgeGraph& kg, const std::vector<synth::QaRecord>& recs,
                                              const ClaimExtractor& extractor = default_claim_extractor);

/// Greedy sentence packing: a chunk grows while its normalized length stays
/// within chunk_len; a single sentence longer than chunk_len forms its own
/// chunk. Documents without clean text are skipped.
std::vector<KbChunk> build_kb_index(const std::vector<corpus::Document>& docs, std::size_t chunk_len);

struct RetrievalHit {
  std::string chunk_id;
  double score = 0.0;

  bool operator==(const RetrievalHit&) const = default;
};

/// Lexical tf-idf ranking. For each distinct query term t present in chunk c:
///   (1 + ln tf(t, c)) * ln(1 + N / df(t))
/// summed over terms; N = number of chunks, df = chunks containing t.
/// Chunks scoring zero are not returned. Ties break by ascending chunk id.
std::vector<RetrievalHit> retrieve(const std::vector<KbChunk>& index, std::string_view query, std::size_t k);

nlohmann::ordered_json to_json(const KbChunk& c);
KbChunk chunk_from_json(const nlohmann::json& j);
void write_index(const std::filesystem::path& path, const std::vector<KbChunk>& index);
std::vector<KbChunk> read_index(const std::filesystem::path& path);

}  // namespace settlekit::knowledge
