#include "settlekit/trainprep.hpp"

#include <fstream>

#include "settlekit/digest.hpp"
#include "settlekit/text.hpp"

namespace settlekit::trainprep {

namespace {

std::string config_text(const TrainingConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

// Serializes items in parallel, then writes them with one ordered writer.
template <typename T, typename F>
void write_lines(const std::vector<T>& items, const std::filesystem::path& path, F serialize) {
  std::vector<std::string> lines(items.size());
  const auto n = static_cast<std::int64_t>(items.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    lines[static_cast<std::size_t>(i)] = serialize(items[static_cast<std::size_t>(i)]);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ExportError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw ExportError("write failed: " + path.string());
}

}  // namespace

void validate(const TrainingConfig& cfg) {
  std::vector<std::string> problems;
  if (cfg.precision.empty()) problems.push_back("precision is empty");
  if (cfg.epochs <= 0) problems.push_back("epochs must be > 0");
  if (cfg.batch_size <= 0) problems.push_back("batch_size must be > 0");
  if (!(cfg.learning_rate > 0.0)) problems.push_back("learning_rate must be > 0");
  if (!(cfg.warmup_ratio >= 0.0 && cfg.warmup_ratio <= 1.0)) problems.push_back("warmup_ratio must lie in [0, 1]");
  if (cfg.lr_scheduler_type.empty()) problems.push_back("lr_scheduler_type is empty");
  if (cfg.truncation_length <= 0) problems.push_back("truncation_length must be > 0");
  if (!problems.empty()) {
    std::string msg = "invalid training config:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw ExportError(msg);
  }
}

nlohmann::ordered_json to_json(const TrainingConfig& cfg) {
  nlohmann::ordered_json j;
  j["precision"] = cfg.precision;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["learning_rate"] = cfg.learning_rate;
  j["warmup_ratio"] = cfg.warmup_ratio;
  j["lr_scheduler_type"] = cfg.lr_scheduler_type;
  j["truncation_length"] = cfg.truncation_length;
  return j;
}

TrainingConfig training_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ExportError("training config must be a JSON object");
  static const std::vector<std::string> kKeys{"precision",    "epochs",           "batch_size",
                                              "learning_rate", "warmup_ratio",    "lr_scheduler_type",
                                              "truncation_length"};
  std::vector<std::string> unknown;
  for (const auto& [k, v] : j.items()) {
    if (std::find(kKeys.begin(), kKeys.end(), k) == kKeys.end()) unknown.push_back(k);
  }
  if (!unknown.empty()) {
    std::string msg = "unknown training config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ExportError(msg);
  }
  TrainingConfig cfg;
  try {
    cfg.precision = j.value("precision", cfg.precision);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.warmup_ratio = j.value("warmup_ratio", cfg.warmup_ratio);
    cfg.lr_scheduler_type = j.value("lr_scheduler_type", cfg.lr_scheduler_type);
    cfg.truncation_length = j.value("truncation_length", cfg.truncation_length);
  } catch (const nlohmann::json::exception& e) {
    throw ExportError(std::string("training config: ") + e.what());
  }
  return cfg;
}

nlohmann::ordered_json ExportManifest::to_json() const {
  nlohmann::ordered_json j;
  j["pretrain_records"] = pretrain_records;
  j["sft_records"] = sft_records;
  j["dropped_contradicted"] = dropped_contradicted;
  j["truncated_records"] = truncated_records;
  j["config_digest"] = config_digest;
  j["truncation_unit"] = kTruncationUnit;
  return j;
}

std::size_t unit_length(std::string_view s) { return text::codepoint_count(text::nfc(s)); }

std::string truncate_units(std::string_view s, std::size_t limit) {
  return text::truncate_codepoints(text::nfc(s), limit);
}

std::string config_digest(const TrainingConfig& cfg) { return sha256_hex(config_text(cfg)); }

ExportManifest export_pretrain(const std::vector<corpus::Document>& docs, const TrainingConfig& cfg,
                               const std::filesystem::path& out_path) {
  validate(cfg);
  std::vector<const corpus::Document*> usable;
  for (const auto& d : docs) {
    if (d.clean_text && !d.rejected() && !d.clean_text->empty()) usable.push_back(&d);
  }
  if (usable.empty()) throw ExportError("export_pretrain: empty corpus");
  const auto limit = static_cast<std::size_t>(cfg.truncation_length);

  ExportManifest m;
  m.pretrain_records = usable.size();
  m.config_digest = config_digest(cfg);
  for (const auto* d : usable) m.truncated_records += unit_length(*d->clean_text) > limit ? 1 : 0;
  write_lines(usable, out_path, [&](const corpus::Document* d) {
    nlohmann::ordered_json j;
    j["text"] = truncate_units(*d->clean_text, limit);
    return j.dump();
  });
  return m;
}

ExportManifest export_sft(const std::vector<synth::QaRecord>& records, const TrainingConfig& cfg,
                          bool drop_contradicted, const std::filesystem::path& out_path) {
  validate(cfg);
  const auto limit = static_cast<std::size_t>(cfg.truncation_length);
  ExportManifest m;
  m.config_digest = config_digest(cfg);
  std::vector<const synth::QaRecord*> kept;
  for (const auto& r : records) {
    if (r.contradicted && drop_contradicted) {
      ++m.dropped_contradicted;
      continue;
    }
    kept.push_back(&r);
    bool truncated = false;
    for (const auto& t : r.turns) {
      truncated = truncated || unit_length(t.question) > limit || unit_length(t.answer) > limit;
    }
    m.truncated_records += truncated ? 1 : 0;
  }
  if (kept.empty()) throw ExportError("export_sft: no surviving records");
  m.sft_records = kept.size();

  write_lines(kept, out_path, [&](const synth::QaRecord* r) {
    nlohmann::ordered_json j;
    auto conv = nlohmann::ordered_json::array();
    for (const auto& t : r->turns) {
      conv.push_back({{"role", "user"}, {"content", truncate_units(t.question, limit)}});
      conv.push_back({{"role", "assistant"}, {"content", truncate_units(t.answer, limit)}});
    }
    j["conversations"] = std::move(conv);
    j["scenario"] = r->scenario.key();
    j["grounding"] = r->grounding;
    if (!drop_contradicted) j["contradicted"] = r->contradicted;
    return j.dump();
  });
  return m;
}

void emit_training_config(const TrainingConfig& cfg, const std::filesystem::path& path) {
  validate(cfg);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ExportError("cannot write " + path.string());
  out << config_text(cfg);
}

TrainingConfig read_training_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ExportError("cannot read " + path.string());
  try {
    return training_config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ExportError(path.string() + ": " + e.what());
  }
}

void write_manifest(const ExportManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ExportError("cannot write " + path.string());
  out << manifest.to_json().dump(2) << '\n';
}

}  // namespace settlekit::trainprep
