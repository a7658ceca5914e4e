#include <doctest.h>

#include <fstream>

#include "settlekit/text.hpp"
#include "settlekit/trainprep.hpp"
#include "support/test_support.hpp"

using namespace settlekit;
using trainprep::TrainingConfig;

namespace {

corpus::Document doc_with(const std::string& text, std::uint64_t order) {
  corpus::Document d;
  d.source_kind = corpus::SourceKind::Book;
  d.raw_text = text;
  d.clean_text = text;
  d.ingest_order = order;
  d.status = corpus::DocStatus::Deduped;
  d.id = corpus::document_id(d.source_kind, text::normalize(text));
  return d;
}

synth::QaRecord record(const std::string& q, const std::string& a, bool contradicted = false) {
  synth::QaRecord r;
  r.id = "r-" + q.substr(0, 4);
  r.scenario = synth::Scenario::parse("DesignPhilosophy/SpongeCity");
  r.turns.push_back({"resident", q, a});
  r.contradicted = contradicted;
  return r;
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<nlohmann::json> out;
  for (std::string line; std::getline(in, line);) out.push_back(nlohmann::json::parse(line));
  return out;
}

}  // namespace

TEST_CASE("defaults match the published training parameters") {
  const TrainingConfig cfg;
  CHECK(cfg.precision == "fp16");
  CHECK(cfg.epochs == 3);
  CHECK(cfg.batch_size == 64);
  CHECK(cfg.learning_rate == 1e-4);
  CHECK(cfg.warmup_ratio == 0.1);
  CHECK(cfg.lr_scheduler_type == "cosine");
  CHECK(cfg.truncation_length == 1024);
  CHECK_NOTHROW(trainprep::validate(cfg));
}

TEST_CASE("training config round trip") {
  testing::TempDir tmp;
  TrainingConfig cfg;
  trainprep::emit_training_config(cfg, tmp / "t.json");
  CHECK(trainprep::read_training_config(tmp / "t.json") == cfg);
  const auto j = nlohmann::json::parse(testing::slurp(tmp / "t.json"));
  CHECK(j.size() == 7);
  cfg.learning_rate = 2.5e-5;
  cfg.lr_scheduler_type = "linear";
  trainprep::emit_training_config(cfg, tmp / "t.json");
  CHECK(trainprep::read_training_config(tmp / "t.json") == cfg);
}

TEST_CASE("config validation") {
  CHECK_THROWS_WITH_AS(trainprep::training_config_from_json({{"epochs", 3}, {"dropout", 0.1}}),
                       doctest::Contains("dropout"), trainprep::ExportError);
  CHECK_THROWS_AS(trainprep::training_config_from_json({{"epochs", "three"}}), trainprep::ExportError);
  TrainingConfig bad;
  bad.warmup_ratio = 1.5;
  bad.epochs = 0;
  CHECK_THROWS_WITH_AS(trainprep::validate(bad), doctest::Contains("warmup_ratio"), trainprep::ExportError);
  CHECK_THROWS_WITH_AS(trainprep::validate(bad), doctest::Contains("epochs"), trainprep::ExportError);
  testing::TempDir tmp;
  CHECK_THROWS_AS(trainprep::emit_training_config(bad, tmp / "x.json"), trainprep::ExportError);
  CHECK_FALSE(std::filesystem::exists(tmp / "x.json"));
}

TEST_CASE("truncation counts NFC code points") {
  CHECK(trainprep::unit_length("海绵城市") == 4);
  CHECK(trainprep::unit_length("e\xCC\x81") == 1);  // e + combining acute composes
  CHECK(trainprep::truncate_units("海绵城市建设", 3) == "海绵城");
  CHECK(trainprep::truncate_units("abc", 10) == "abc");
}

TEST_CASE("pretraining export respects the truncation length") {
  testing::TempDir tmp;
  TrainingConfig cfg;
  std::string long_cn;
  for (int i = 0; i < 700; ++i) long_cn += "城市";
  std::vector<corpus::Document> docs{doc_with("Short text.", 0), doc_with(long_cn, 1), doc_with(std::string(2000, 'a'), 2)};
  auto rejected = doc_with("rejected", 3);
  rejected.status = corpus::DocStatus::Rejected;
  docs.push_back(rejected);
  const auto m = trainprep::export_pretrain(docs, cfg, tmp / "p.jsonl");
  CHECK(m.pretrain_records == 3);
  CHECK(m.truncated_records == 2);
  CHECK(m.config_digest == trainprep::config_digest(cfg));
  const auto lines = read_jsonl(tmp / "p.jsonl");
  REQUIRE(lines.size() == 3);
  for (const auto& l : lines) CHECK(trainprep::unit_length(l.at("text").get<std::string>()) <= 1024);
  CHECK(lines[0].at("text") == "Short text.");
  CHECK_THROWS_AS(trainprep::export_pretrain({rejected}, cfg, tmp / "e.jsonl"), trainprep::ExportError);
}

TEST_CASE("SFT export drops contradicted records by default") {
  testing::TempDir tmp;
  const TrainingConfig cfg;
  const std::vector<synth::QaRecord> recs{record("What is a sponge city?", "A design approach."),
                                          record("Wrong claim?", "Bad answer.", true),
                                          record("Long?", std::string(1500, 'x'))};
  auto m = trainprep::export_sft(recs, cfg, true, tmp / "s.jsonl");
  CHECK(m.sft_records == 2);
  CHECK(m.dropped_contradicted == 1);
  CHECK(m.truncated_records == 1);
  auto lines = read_jsonl(tmp / "s.jsonl");
  REQUIRE(lines.size() == 2);
  CHECK(lines[0].at("conversations").size() == 2);
  CHECK(lines[0].at("conversations")[0].at("role") == "user");
  CHECK(lines[0].at("conversations")[1].at("role") == "assistant");
  CHECK(lines[0].at("scenario") == "DesignPhilosophy/SpongeCity");
  CHECK_FALSE(lines[0].contains("contradicted"));
  CHECK(lines[1].at("conversations")[1].at("content").get<std::string>().size() == 1024);

  m = trainprep::export_sft(recs, cfg, false, tmp / "s.jsonl");
  CHECK(m.sft_records == 3);
  lines = read_jsonl(tmp / "s.jsonl");
  CHECK(lines[1].at("contradicted") == true);
  CHECK_THROWS_AS(trainprep::export_sft({recs[1]}, cfg, true, tmp / "s.jsonl"), trainprep::ExportError);
}

TEST_CASE("manifest records the truncation unit") {
  testing::TempDir tmp;
  trainprep::ExportManifest m;
  m.sft_records = 4;
  trainprep::write_manifest(m, tmp / "m.json");
  const auto j = nlohmann::json::parse(testing::slurp(tmp / "m.json"));
  CHECK(j.at("truncation_unit") == "character");
  CHECK(j.at("sft_records") == 4);
}
