#include "settlekit/config.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>

#include "settlekit/synth.hpp"

namespace settlekit::config {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join_lines(const std::vector<std::string>& v) {
  std::string out = "invalid configuration:";
  for (const auto& s : v) out += "\n  " + s;
  return out;
}

class Reader {
 public:
  explicit Reader(fs::path base) : base_(std::move(base)) {}

  std::vector<std::string> problems;

  // Reports keys of `obj` outside `allowed`; returns false if obj is not an object.
  bool object(const json& obj, const std::string& where, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) {
      problems.push_back(where + ": expected an object");
      return false;
    }
    for (const auto& [k, v] : obj.items()) {
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
        problems.push_back("unknown key " + join(where, k));
      }
    }
    return true;
  }

  template <typename T>
  void get(const json& obj, const std::string& where, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception&) {
      problems.push_back(join(where, key) + ": wrong type (" + std::string(obj.at(key).type_name()) + ")");
    }
  }

  void path(const json& obj, const std::string& where, const char* key, fs::path& out) {
    std::string s;
    if (!obj.contains(key)) return;
    if (obj.at(key).is_null()) {
      out.clear();
      return;
    }
    get(obj, where, key, s);
    if (!s.empty()) out = resolve(s);
  }

  fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : (base_ / p).lexically_normal(); }

  static std::string join(const std::string& where, std::string_view key) {
    return where.empty() ? std::string(key) : where + "." + std::string(key);
  }

 private:
  fs::path base_;
};

void check_scenarios(Reader& r, const std::map<std::string, std::size_t>& counts, const std::string& where) {
  for (const auto& [key, n] : counts) {
    try {
      synth::Scenario::parse(key);
    } catch (const synth::SynthError& e) {
      r.problems.push_back(where + "." + key + ": " + e.what());
    }
  }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_lines(problems)), problems_(std::move(problems)) {}

fs::path PipelineConfig::corpus_store() const {
  return paths.corpus_store.empty() ? paths.output_dir / "corpus.jsonl" : paths.corpus_store;
}

PipelineConfig parse_config(const json& j, const fs::path& base_dir) {
  Reader r(base_dir);
  PipelineConfig cfg;
  cfg.paths.output_dir = r.resolve("out");
  if (!r.object(j, "", {"paths", "workers", "cleanse", "synth", "trainprep", "eval"})) throw ConfigError(r.problems);

  r.get(j, "", "workers", cfg.workers);
  if (cfg.workers < 0) r.problems.push_back("workers: must be >= 0");

  if (j.contains("paths") && r.object(j["paths"], "paths",
                                      {"raw_dir", "corpus_store", "lexicon", "templates", "kg_file", "kb_source_dir",
                                       "output_dir", "evalset", "scores_csv", "reported_totals"})) {
    const json& p = j["paths"];
    r.path(p, "paths", "raw_dir", cfg.paths.raw_dir);
    r.path(p, "paths", "corpus_store", cfg.paths.corpus_store);
    r.path(p, "paths", "lexicon", cfg.paths.lexicon);
    r.path(p, "paths", "templates", cfg.paths.templates);
    r.path(p, "paths", "kg_file", cfg.paths.kg_file);
    r.path(p, "paths", "kb_source_dir", cfg.paths.kb_source_dir);
    r.path(p, "paths", "output_dir", cfg.paths.output_dir);
    r.path(p, "paths", "evalset", cfg.paths.evalset);
    r.path(p, "paths", "scores_csv", cfg.paths.scores_csv);
    r.path(p, "paths", "reported_totals", cfg.paths.reported_totals);
  }

  if (j.contains("cleanse") &&
      r.object(j["cleanse"], "cleanse", {"min_sentence_len", "match_mode", "near_dup"})) {
    const json& c = j["cleanse"];
    r.get(c, "cleanse", "min_sentence_len", cfg.cleanse.min_sentence_len);
    std::string mode;
    r.get(c, "cleanse", "match_mode", mode);
    if (!mode.empty()) {
      try {
        cfg.cleanse.match_mode = cleanse::parse_match_mode(mode);
      } catch (const cleanse::CleanseError& e) {
        r.problems.push_back(std::string("cleanse.match_mode: ") + e.what());
      }
    }
    if (c.contains("near_dup") && r.object(c["near_dup"], "cleanse.near_dup", {"enabled", "threshold", "shingle"})) {
      r.get(c["near_dup"], "cleanse.near_dup", "enabled", cfg.cleanse.near_dup.enabled);
      r.get(c["near_dup"], "cleanse.near_dup", "threshold", cfg.cleanse.near_dup.threshold);
      r.get(c["near_dup"], "cleanse.near_dup", "shingle", cfg.cleanse.near_dup.shingle);
      if (cfg.cleanse.near_dup.threshold <= 0.0 || cfg.cleanse.near_dup.threshold > 1.0) {
        r.problems.push_back("cleanse.near_dup.threshold: must lie in (0, 1]");
      }
    }
  }

  if (j.contains("synth") &&
      r.object(j["synth"], "synth",
               {"client", "endpoint", "mock_max_in_flight", "seed", "temperature", "max_turns", "max_turns_cap",
                "single_turn_template", "multi_turn_template", "roles", "target_counts", "multi_turn_counts",
                "production_target", "chunk_len", "grounding_k", "reject_patterns"})) {
    const json& s = j["synth"];
    auto& st = cfg.synth;
    r.get(s, "synth", "client", st.client);
    if (st.client != "mock" && st.client != "http") r.problems.push_back("synth.client: must be mock or http");
    if (s.contains("endpoint") && !s["endpoint"].is_null() &&
        r.object(s["endpoint"], "synth.endpoint",
                 {"base_url", "model", "api_key_env", "timeout_seconds", "max_in_flight", "max_retries"})) {
      chat::EndpointConfig e;
      const json& ej = s["endpoint"];
      r.get(ej, "synth.endpoint", "base_url", e.base_url);
      r.get(ej, "synth.endpoint", "model", e.model);
      r.get(ej, "synth.endpoint", "api_key_env", e.api_key_env);
      r.get(ej, "synth.endpoint", "timeout_seconds", e.timeout_seconds);
      r.get(ej, "synth.endpoint", "max_in_flight", e.max_in_flight);
      r.get(ej, "synth.endpoint", "max_retries", e.max_retries);
      st.endpoint = e;
    }
    r.get(s, "synth", "mock_max_in_flight", st.mock_max_in_flight);
    r.get(s, "synth", "seed", st.seed);
    r.get(s, "synth", "temperature", st.temperature);
    if (st.temperature < 0.0 || st.temperature > 2.0) r.problems.push_back("synth.temperature: must lie in [0, 2]");
    r.get(s, "synth", "max_turns", st.max_turns);
    r.get(s, "synth", "max_turns_cap", st.max_turns_cap);
    if (st.max_turns < 2 || st.max_turns > st.max_turns_cap) {
      r.problems.push_back("synth.max_turns: must lie in [2, max_turns_cap]");
    }
    r.get(s, "synth", "single_turn_template", st.single_turn_template);
    r.get(s, "synth", "multi_turn_template", st.multi_turn_template);
    r.get(s, "synth", "roles", st.roles);
    for (const auto& role : st.roles) {
      try {
        synth::builtin_role(role);
      } catch (const synth::SynthError& e) {
        r.problems.push_back(std::string("synth.roles: ") + e.what());
      }
    }
    r.get(s, "synth", "target_counts", st.target_counts);
    check_scenarios(r, st.target_counts, "synth.target_counts");
    r.get(s, "synth", "multi_turn_counts", st.multi_turn_counts);
    check_scenarios(r, st.multi_turn_counts, "synth.multi_turn_counts");
    if (!st.multi_turn_counts.empty() && st.roles.size() < 2) {
      r.problems.push_back("synth.roles: multi-turn dialogues need at least two roles");
    }
    r.get(s, "synth", "production_target", st.production_target);
    r.get(s, "synth", "chunk_len", st.chunk_len);
    r.get(s, "synth", "grounding_k", st.grounding_k);
    r.get(s, "synth", "reject_patterns", st.reject_patterns);
    for (const auto& p : st.reject_patterns) {
      try {
        std::regex re(p);
      } catch (const std::regex_error& e) {
        r.problems.push_back("synth.reject_patterns: bad regex '" + p + "': " + e.what());
      }
    }
  }

  if (j.contains("trainprep") && r.object(j["trainprep"], "trainprep", {"training", "drop_contradicted"})) {
    const json& t = j["trainprep"];
    r.get(t, "trainprep", "drop_contradicted", cfg.trainprep.drop_contradicted);
    if (t.contains("training")) {
      try {
        cfg.trainprep.training = trainprep::training_config_from_json(t["training"]);
        trainprep::validate(cfg.trainprep.training);
      } catch (const trainprep::ExportError& e) {
        r.problems.push_back(std::string("trainprep.training: ") + e.what());
      }
    }
  }

  if (j.contains("eval") &&
      r.object(j["eval"], "eval", {"schema", "rubric", "ranking_key", "judge", "judge_attempts"})) {
    const json& e = j["eval"];
    r.path(e, "eval", "schema", cfg.eval.schema);
    r.get(e, "eval", "rubric", cfg.eval.rubric);
    std::string key;
    r.get(e, "eval", "ranking_key", key);
    if (!key.empty()) {
      try {
        cfg.eval.ranking_key = evalhsc::parse_rank_key(key);
      } catch (const evalhsc::EvalError& err) {
        r.problems.push_back(std::string("eval.ranking_key: ") + err.what());
      }
    }
    r.get(e, "eval", "judge", cfg.eval.judge);
    r.get(e, "eval", "judge_attempts", cfg.eval.judge_attempts);
  }

  if (!r.problems.empty()) throw ConfigError(r.problems);
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({"cannot read config " + path.string()});
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError({path.string() + ": " + e.what()});
  }
  return parse_config(j, fs::absolute(path).parent_path());
}

nlohmann::ordered_json to_json(const PipelineConfig& cfg) {
  nlohmann::ordered_json j;
  auto p = [](const fs::path& x) { return x.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(x.string()); };
  j["paths"] = {{"raw_dir", p(cfg.paths.raw_dir)},
                {"corpus_store", p(cfg.corpus_store())},
                {"lexicon", p(cfg.paths.lexicon)},
                {"templates", p(cfg.paths.templates)},
                {"kg_file", p(cfg.paths.kg_file)},
                {"kb_source_dir", p(cfg.paths.kb_source_dir)},
                {"output_dir", p(cfg.paths.output_dir)},
                {"evalset", p(cfg.paths.evalset)},
                {"scores_csv", p(cfg.paths.scores_csv)},
                {"reported_totals", p(cfg.paths.reported_totals)}};
  j["workers"] = cfg.workers;
  j["cleanse"] = {{"min_sentence_len", cfg.cleanse.min_sentence_len},
                  {"match_mode", cleanse::to_string(cfg.cleanse.match_mode)},
                  {"near_dup",
                   {{"enabled", cfg.cleanse.near_dup.enabled},
                    {"threshold", cfg.cleanse.near_dup.threshold},
                    {"shingle", cfg.cleanse.near_dup.shingle}}}};
  j["synth"] = {{"client", cfg.synth.client},
                {"seed", cfg.synth.seed},
                {"temperature", cfg.synth.temperature},
                {"max_turns", cfg.synth.max_turns},
                {"target_counts", cfg.synth.target_counts},
                {"multi_turn_counts", cfg.synth.multi_turn_counts},
                {"production_target", cfg.synth.production_target}};
  j["trainprep"] = {{"training", trainprep::to_json(cfg.trainprep.training)},
                    {"drop_contradicted", cfg.trainprep.drop_contradicted}};
  j["eval"] = {{"schema", p(cfg.eval.schema)},
               {"rubric", cfg.eval.rubric},
               {"ranking_key", evalhsc::to_string(cfg.eval.ranking_key)},
               {"judge", cfg.eval.judge}};
  return j;
}

void validate_paths(const PipelineConfig& cfg, const std::vector<std::string>& stages) {
  std::vector<std::string> problems;
  auto need = [&](const fs::path& p, const std::string& key, bool dir) {
    if (p.empty()) {
      problems.push_back(key + ": required by the requested stages but not set");
    } else if (dir ? !fs::is_directory(p) : !fs::is_regular_file(p)) {
      problems.push_back(key + ": " + p.string() + (dir ? " is not a directory" : " is not a readable file"));
    }
  };
  auto optional = [&](const fs::path& p, const std::string& key, bool dir) {
    if (!p.empty()) need(p, key, dir);
  };
  const std::set<std::string> s(stages.begin(), stages.end());
  if (s.count("ingest")) need(cfg.paths.raw_dir, "paths.raw_dir", true);
  if (s.count("cleanse")) optional(cfg.paths.lexicon, "paths.lexicon", false);
  if (s.count("synth") || s.count("kb")) {
    optional(cfg.paths.templates, "paths.templates", true);
    optional(cfg.paths.kb_source_dir, "paths.kb_source_dir", true);
  }
  if (s.count("validate") || s.count("kg")) need(cfg.paths.kg_file, "paths.kg_file", false);
  if (s.count("eval")) {
    need(cfg.paths.evalset, "paths.evalset", false);
    optional(cfg.eval.schema, "eval.schema", false);
    optional(cfg.paths.scores_csv, "paths.scores_csv", false);
    optional(cfg.paths.reported_totals, "paths.reported_totals", false);
    optional(cfg.paths.templates, "paths.templates", true);
  }
  if (s.count("report")) {
    optional(cfg.paths.reported_totals, "paths.reported_totals", false);
  }
  if (!problems.empty()) throw ConfigError(problems);
}

std::unique_ptr<chat::ChatClient> make_client(const SynthSettings& s) {
  if (s.client == "mock") {
    return std::make_unique<chat::MockChatClient>(chat::ClientLimits{s.mock_max_in_flight, 2, {}});
  }
  if (!s.endpoint || s.endpoint->base_url.empty()) throw ConfigError({"no client configured"});
  return std::make_unique<chat::HttpChatClient>(*s.endpoint);
}

}  // namespace settlekit::config
