#pragma once

// Pipeline configuration: a single JSON document. Flags override it; the
// API key is the only value read from the environment.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "settlekit/chat_client.hpp"
#include "settlekit/cleanse.hpp"
#include "settlekit/evalhsc.hpp"
#include "settlekit/trainprep.hpp"

namespace settlekit::config {

/// Carries every problem found, one per line.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct Paths {
  std::filesystem::path raw_dir;        // standard/, book/, website/ subdirectories
  std::filesystem::path corpus_store;   // default: <output_dir>/corpus.jsonl
  std::filesystem::path lexicon;
  std::filesystem::path templates;      // directory of <id>.txt + <id>.json overrides
  std::filesystem::path kg_file;
  std::filesystem::path kb_source_dir;  // optional extra standards texts for the KB
  std::filesystem::path output_dir = "out";
  std::filesystem::path evalset;
  std::filesystem::path scores_csv;       // imported human scores
  std::filesystem::path reported_totals;  // JSON {model: total}
};

struct CleanseSettings {
  std::size_t min_sentence_len = cleanse::kDefaultMinSentenceLen;
  cleanse::MatchMode match_mode = cleanse::MatchMode::Substring;
  cleanse::NearDupOptions near_dup;
};

struct SynthSettings {
  std::string client = "mock";  // "mock" | "http"
  std::optional<chat::EndpointConfig> endpoint;
  std::size_t mock_max_in_flight = 4;
  std::uint64_t seed = 7;
  double temperature = 0.7;
  std::size_t max_turns = 4;
  std::size_t max_turns_cap = 16;
  std::string single_turn_template = "single_turn_role";
  std::string multi_turn_template = "multi_turn_discussion";
  std::vector<std::string> roles{"resident", "urban planner", "architectural designer", "landscape architect"};
  std::map<std::string, std::size_t> target_counts;      // scenario key -> single-turn records
  std::map<std::string, std::size_t> multi_turn_counts;  // scenario key -> dialogues
  std::size_t production_target = 28000;
  std::size_t chunk_len = 200;
  std::size_t grounding_k = 2;
  std::vector<std::string> reject_patterns;
};

struct TrainprepSettings {
  trainprep::TrainingConfig training;
  bool drop_contradicted = true;
};

struct EvalSettings {
  std::filesystem::path schema;  // empty: canonical schema
  std::string rubric = "judge_rubric";
  evalhsc::RankKey ranking_key = evalhsc::RankKey::DimensionSum;
  bool judge = true;
  int judge_attempts = 3;
};

struct PipelineConfig {
  Paths paths;
  int workers = 0;
  CleanseSettings cleanse;
  SynthSettings synth;
  TrainprepSettings trainprep;
  EvalSettings eval;

  std::filesystem::path corpus_store() const;
};

/// Parses and checks a config document. Relative paths resolve against
/// `base_dir`. Unknown keys and type errors are all reported together.
PipelineConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

nlohmann::ordered_json to_json(const PipelineConfig& cfg);

/// Input paths the given stage reads; the stage list is checked before any
/// stage runs.
void validate_paths(const PipelineConfig& cfg, const std::vector<std::string>& stages);

/// The configured chat client. Throws ConfigError("no client configured")
/// when an http client lacks an endpoint.
std::unique_ptr<chat::ChatClient> make_client(const SynthSettings& s);

}  // namespace settlekit::config
