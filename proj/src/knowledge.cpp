#include "settlekit/knowledge.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "settlekit/kernels.hpp"
#include "settlekit/text.hpp"

namespace settlekit {

namespace kb {

std::string_view to_string(VerdictStatus s) {
  switch (s) {
    case VerdictStatus::Supported: return "supported";
    case VerdictStatus::Contradicted: return "contradicted";
    case VerdictStatus::Unknown: return "unknown";
  }
  return "unknown";
}

VerdictStatus parse_verdict_status(std::string_view s) {
  if (s == "supported") return VerdictStatus::Supported;
  if (s == "contradicted") return VerdictStatus::Contradicted;
  if (s == "unknown") return VerdictStatus::Unknown;
  throw std::invalid_argument("unknown verdict status: " + std::string(s));
}

}  // namespace kb

namespace knowledge {

Triple make_triple(std::string_view subject, std::string_view predicate, std::string_view object) {
  Triple t{text::normalize(subject), text::normalize(predicate), text::normalize(object)};
  if (t.subject.empty() || t.predicate.empty() || t.object.empty()) {
    throw KnowledgeError("triple fields must be non-empty: (" + std::string(subject) + ", " +
                         std::string(predicate) + ", " + std::string(object) + ")");
  }
  return t;
}

std::string format_triple(const Triple& t) { return "(" + t.subject + ", " + t.predicate + ", " + t.object + ")"; }

bool KnowledgeGraph::insert(const Triple& raw) {
  const Triple t = make_triple(raw.subject, raw.predicate, raw.object);
  if (triples_.count(t)) return false;
  auto& objs = objects_[{t.subject, t.predicate}];
  if (is_functional(t.predicate) && !objs.empty()) {
    throw KnowledgeError("functional predicate " + t.predicate + " already holds " +
                         format_triple(Triple{t.subject, t.predicate, *objs.begin()}) + "; rejecting " +
                         format_triple(t));
  }
  objs.insert(t.object);
  triples_.insert(t);
  return true;
}

void KnowledgeGraph::declare_functional(std::string_view predicate) {
  const std::string p = text::normalize(predicate);
  if (p.empty()) throw KnowledgeError("functional predicate name is empty");
  for (const auto& [key, objs] : objects_) {
    if (key.second == p && objs.size() > 1) {
      throw KnowledgeError("cannot declare " + p + " functional: subject " + key.first + " has " +
                           std::to_string(objs.size()) + " objects");
    }
  }
  functional_.insert(p);
}

const std::set<std::string>* KnowledgeGraph::objects(const std::string& subject, const std::string& predicate) const {
  const auto it = objects_.find({subject, predicate});
  return it == objects_.end() ? nullptr : &it->second;
}

KnowledgeGraph KnowledgeGraph::parse(std::string_view content, const std::string& origin) {
  KnowledgeGraph kg;
  std::vector<Triple> pending;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t lineno = 0;
  // Declarations apply regardless of position, so triples are inserted after.
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    if (trimmed.rfind("!functional", 0) == 0) {
      kg.declare_functional(trimmed.substr(std::string_view("!functional").size()));
      continue;
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1) {
      fields.push_back(line.substr(start, tab - start));
    }
    fields.push_back(line.substr(start));
    if (fields.size() != 3) {
      throw KnowledgeError(origin + ":" + std::to_string(lineno) + ": expected 3 tab-separated fields, got " +
                           std::to_string(fields.size()));
    }
    try {
      pending.push_back(make_triple(fields[0], fields[1], fields[2]));
    } catch (const KnowledgeError& e) {
      throw KnowledgeError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  for (const auto& t : pending) kg.insert(t);
  return kg;
}

KnowledgeGraph KnowledgeGraph::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw KnowledgeError("cannot read knowledge graph " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(text::decode_utf8_lossy(buf.str()).text, path.string());
}

void KnowledgeGraph::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw KnowledgeError("cannot write " + path.string());
  for (const auto& p : functional_) out << "!functional " << p << '\n';
  for (const auto& t : triples_) out << t.subject << '\t' << t.predicate << '\t' << t.object << '\n';
}

KnowledgeGraph add_triple(KnowledgeGraph kg, const Triple& t) {
  kg.insert(t);
  return kg;
}

Verdict validate_claim(const KnowledgeGraph& kg, const Triple& raw) {
  const Triple claim = make_triple(raw.subject, raw.predicate, raw.object);
  Verdict v{claim, VerdictStatus::Unknown, std::nullopt};
  if (kg.contains(claim)) {
    v.status = VerdictStatus::Supported;
    return v;
  }
  if (kg.is_functional(claim.predicate)) {
    if (const auto* objs = kg.objects(claim.subject, claim.predicate); objs != nullptr && !objs->empty()) {
      v.status = VerdictStatus::Contradicted;
      v.witness = Triple{claim.subject, claim.predicate, *objs->begin()};
    }
  }
  return v;
}

std::vector<Triple> default_claim_extractor(const synth::QaRecord& rec) {
  static const std::regex kIsA(R"(^(?:the )?(.+?) is an? (.+?)[.!?]*$)");
  static const std::regex kBelongs("^(.+?)属于(.+?)(?:。|！|？|；|[.!?])*$");
  std::vector<Triple> claims;
  for (const auto& turn : rec.turns) {
    for (const auto& sentence : corpus::split_text(turn.answer)) {
      const std::string s = text::normalize(sentence);
      std::smatch m;
      if (std::regex_match(s, m, kIsA) || std::regex_match(s, m, kBelongs)) {
        try {
          claims.push_back(make_triple(m[1].str(), "is_a", m[2].str()));
        } catch (const KnowledgeError&) {
          // a match with an empty side is not a claim
        }
      }
    }
  }
  return claims;
}

synth::QaRecord validate_record(const KnowledgeGraph& kg, const synth::QaRecord& rec,
                                const ClaimExtractor& extractor) {
  synth::QaRecord out = rec;
  out.kg_verdicts.clear();
  out.contradicted = false;
  for (const auto& claim : extractor(rec)) {
    out.kg_verdicts.push_back(validate_claim(kg, claim));
    out.contradicted = out.contradicted || out.kg_verdicts.back().status == VerdictStatus::Contradicted;
  }
  return out;
}

std::vector<synth::QaRecord> validate_records(const KnowledgeGraph& kg, const std::vector<synth::QaRecord>& recs,
                                              const ClaimExtractor& extractor) {
  std::vector<synth::QaRecord> out(recs.size());
  const auto n = static_cast<std::int64_t>(recs.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = validate_record(kg, recs[static_cast<std::size_t>(i)], extractor);
    } catch (...) {
#pragma omp critical(settlekit_validate_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

std::vector<KbChunk> build_kb_index(const std::vector<corpus::Document>& docs, std::size_t chunk_len) {
  std::vector<KbChunk> chunks;
  for (const auto& d : docs) {
    if (!d.clean_text || d.rejected()) continue;
    std::vector<std::string> current;
    std::size_t n = 0;
    auto flush = [&] {
      if (current.empty()) return;
      char suffix[32];
      std::snprintf(suffix, sizeof suffix, "-%05zu", n++);
      chunks.push_back(KbChunk{d.id.substr(0, 16) + suffix, d.id, text::join_sentences(current), {}});
      current.clear();
    };
    for (auto& sentence : corpus::split_text(*d.clean_text)) {
      if (!current.empty()) {
        std::vector<std::string> candidate = current;
        candidate.push_back(sentence);
        if (text::codepoint_count(text::normalize(text::join_sentences(candidate))) > chunk_len) flush();
      }
      current.push_back(std::move(sentence));
    }
    flush();
  }
  std::vector<std::string> texts;
  texts.reserve(chunks.size());
  for (const auto& c : chunks) texts.push_back(c.text);
  auto counts = kernels::term_counts(texts);
  for (std::size_t i = 0; i < chunks.size(); ++i) chunks[i].term_counts = std::move(counts[i]);
  return chunks;
}

std::vector<RetrievalHit> retrieve(const std::vector<KbChunk>& index, std::string_view query, std::size_t k) {
  if (k == 0) throw KnowledgeError("retrieve: k must be at least 1");
  const std::string normalized = text::normalize(query);
  if (normalized.empty()) throw KnowledgeError("retrieve: empty query");

  std::set<std::string> terms;
  for (auto& t : text::tokenize_terms(normalized)) terms.insert(std::move(t));
  const double n = static_cast<double>(index.size());
  std::map<std::string, double> weights;
  for (const auto& t : terms) {
    std::size_t df = 0;
    for (const auto& c : index) df += c.term_counts.count(t);
    if (df > 0) weights[t] = std::log(1.0 + n / static_cast<double>(df));
  }
  if (weights.empty()) return {};

  std::vector<const std::map<std::string, std::uint32_t>*> maps;
  maps.reserve(index.size());
  for (const auto& c : index) maps.push_back(&c.term_counts);
  const std::vector<double> scores = kernels::score_chunks(maps, weights);

  std::vector<RetrievalHit> hits;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (scores[i] > 0.0) hits.push_back(RetrievalHit{index[i].id, scores[i]});
  }
  std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    return a.score != b.score ? a.score > b.score : a.chunk_id < b.chunk_id;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

nlohmann::ordered_json to_json(const KbChunk& c) {
  nlohmann::ordered_json j;
  j["id"] = c.id;
  j["source_doc"] = c.source_doc;
  j["text"] = c.text;
  nlohmann::ordered_json counts(nlohmann::ordered_json::object());
  for (const auto& [t, n] : c.term_counts) counts[t] = n;
  j["term_counts"] = std::move(counts);
  return j;
}

KbChunk chunk_from_json(const nlohmann::json& j) {
  KbChunk c;
  c.id = j.at("id").get<std::string>();
  c.source_doc = j.at("source_doc").get<std::string>();
  c.text = j.at("text").get<std::string>();
  for (const auto& [t, n] : j.at("term_counts").items()) c.term_counts[t] = n.get<std::uint32_t>();
  return c;
}

void write_index(const std::filesystem::path& path, const std::vector<KbChunk>& index) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw KnowledgeError("cannot write " + path.string());
  for (const auto& c : index) out << to_json(c).dump() << '\n';
}

std::vector<KbChunk> read_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw KnowledgeError("cannot read index " + path.string());
  std::vector<KbChunk> out;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    out.push_back(chunk_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

}  // namespace knowledge
}  // namespace settlekit
