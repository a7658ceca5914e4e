#pragma once

// Stage runners behind the command-line tool. Each stage reads and writes
// artifacts under the configured output directory and returns a report;
// data artifacts carry no timestamps, so reruns are byte-identical.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "settlekit/config.hpp"
#include "settlekit/knowledge.hpp"

namespace settlekit::pipeline {

struct StageReport {
  std::string stage;
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  std::vector<std::string> errors;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
  double duration_ms = 0.0;

  bool ok() const { return errors.empty(); }
  nlohmann::ordered_json to_json() const;
};

// Artifact names inside the output directory.
inline constexpr const char* kDedupReport = "dedup_report.json";
inline constexpr const char* kCleanseReport = "cleanse_report.json";
inline constexpr const char* kKbIndex = "kb_index.jsonl";
inline constexpr const char* kRecords = "qa_records.jsonl";
inline constexpr const char* kSynthManifest = "synth_manifest.json";
inline constexpr const char* kValidatedRecords = "qa_validated.jsonl";
inline constexpr const char* kKgReport = "kg_report.json";
inline constexpr const char* kPretrain = "pretrain.jsonl";
inline constexpr const char* kPretrainManifest = "pretrain_manifest.json";
inline constexpr const char* kSft = "sft.jsonl";
inline constexpr const char* kSftManifest = "sft_manifest.json";
inline constexpr const char* kTrainingConfig = "training_config.json";
inline constexpr const char* kScores = "scores.csv";
inline constexpr const char* kEvalReport = "eval_report.json";
inline constexpr const char* kEvalTable = "eval_report.txt";
inline constexpr const char* kReport = "report.json";
inline constexpr const char* kReportTable = "report.txt";
inline constexpr const char* kRunManifest = "run_manifest.jsonl";

/// Ingests every file under raw_dir/{standard,book,website} (sorted), or a
/// single file when `single_file` is set (appended to the existing store).
StageReport run_ingest(const config::PipelineConfig& cfg, std::optional<std::filesystem::path> single_file = {},
                       std::optional<corpus::SourceKind> kind = {});

/// Extraction, sensitive-word filtering, article then sentence dedup.
StageReport run_cleanse(const config::PipelineConfig& cfg);

/// Builds the KB index from deduped Standard documents (plus kb_source_dir).
StageReport run_kb_build(const config::PipelineConfig& cfg);
std::vector<knowledge::RetrievalHit> run_kb_query(const config::PipelineConfig& cfg, const std::string& query,
                                                  std::size_t k);

/// Single-turn batches per target_counts and grounded multi-turn dialogues
/// per multi_turn_counts.
StageReport run_synth(const config::PipelineConfig& cfg, chat::ChatClient* client);

/// Knowledge-graph validation of the synthesized records.
StageReport run_validate(const config::PipelineConfig& cfg);

/// Pretraining and SFT exports plus the training config.
StageReport run_export(const config::PipelineConfig& cfg);

/// Eval-set schema check, judging of the configured model, imported scores,
/// ranked reports.
StageReport run_eval(const config::PipelineConfig& cfg, chat::ChatClient* client);

/// Ranked reports from a scores CSV and optional reported totals.
StageReport run_report(const config::PipelineConfig& cfg, evalhsc::RankKey key,
                       const std::filesystem::path& scores_csv, const std::filesystem::path& totals_json);

/// ingest -> cleanse -> synth -> validate -> export [-> eval]; halts at the
/// first stage with errors.
std::vector<StageReport> run_pipeline(const config::PipelineConfig& cfg, chat::ChatClient* client);

/// Appends {stage, input_digest, output_digest, duration_ms, errors} to the
/// run manifest in the output directory.
void append_run_manifest(const config::PipelineConfig& cfg, const StageReport& report);

/// SHA-256 over (name, content digest) of each existing path, in order.
std::string digest_paths(const std::vector<std::filesystem::path>& paths);

/// {model: total} map from a JSON file.
std::map<std::string, double> read_reported_totals(const std::filesystem::path& path);

}  // namespace settlekit::pipeline
