#pragma once

// Training-ready exports: pretraining text, SFT conversations and the
// training hyperparameter record.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "settlekit/corpus.hpp"
#include "settlekit/synth.hpp"

namespace settlekit::trainprep {

class ExportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Texts are truncated in NFC code points ("characters"), not model tokens.
inline constexpr std::string_view kTruncationUnit = "character";

struct TrainingConfig {
  std::string precision = "fp16";
  int epochs = 3;
  int batch_size = 64;
  double learning_rate = 1e-4;
  double warmup_ratio = 0.1;
  std::string lr_scheduler_type = "cosine";
  int truncation_length = 1024;

  bool operator==(const TrainingConfig&) const = default;
};

/// Throws ExportError on epochs <= 0, batch_size <= 0, learning_rate <= 0,
/// warmup_ratio outside [0, 1], truncation_length <= 0 or empty strings.
void validate(const TrainingConfig& cfg);

/// The seven fields in declaration order.
nlohmann::ordered_json to_json(const TrainingConfig& cfg);
/// Rejects unknown and missing keys.
TrainingConfig training_config_from_json(const nlohmann::json& j);

struct ExportManifest {
  std::size_t pretrain_records = 0;
  std::size_t sft_records = 0;
  std::size_t dropped_contradicted = 0;
  std::size_t truncated_records = 0;
  std::string config_digest;

  nlohmann::ordered_json to_json() const;
};

/// Length of `s` in truncation units.
std::size_t unit_length(std::string_view s);
/// NFC form of `s`, cut to at most `limit` units.
std::string truncate_units(std::string_view s, std::size_t limit);

/// SHA-256 of the serialized config (as written by emit_training_config).
std::string config_digest(const TrainingConfig& cfg);

/// One {"text": ...} line per document. Throws on an empty corpus.
ExportManifest export_pretrain(const std::vector<corpus::Document>& docs, const TrainingConfig& cfg,
                               const std::filesystem::path& out_path);

/// One {"conversations", "scenario", "grounding"[, "contradicted"]} line per
/// record; each turn contributes a user and an assistant message.
ExportManifest export_sft(const std::vector<synth::QaRecord>& records, const TrainingConfig& cfg,
                          bool drop_contradicted, const std::filesystem::path& out_path);

/// Validates, then writes the config JSON.
void emit_training_config(const TrainingConfig& cfg, const std::filesystem::path& path);
TrainingConfig read_training_config(const std::filesystem::path& path);

/// Writes `manifest` as JSON to `path`.
void write_manifest(const ExportManifest& manifest, const std::filesystem::path& path);

}  // namespace settlekit::trainprep
