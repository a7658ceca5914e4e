#include "settlekit/pipeline.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>

#include "settlekit/cleanse.hpp"
#include "settlekit/corpus.hpp"
#include "settlekit/digest.hpp"
#include "settlekit/evalhsc.hpp"
#include "settlekit/kernels.hpp"
#include "settlekit/synth.hpp"
#include "settlekit/trainprep.hpp"

namespace settlekit::pipeline {

namespace fs = std::filesystem;
using corpus::Document;
using corpus::DocStatus;

namespace {

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& s) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << s;
}

fs::path out_path(const config::PipelineConfig& cfg, const char* name) { return cfg.paths.output_dir / name; }

// Runs `body`, turning escaping exceptions into stage errors and timing it.
template <typename F>
StageReport staged(const std::string& name, F&& body) {
  StageReport report;
  report.stage = name;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(report);
  } catch (const std::exception& e) {
    report.errors.emplace_back(e.what());
  }
  report.duration_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::map<std::string, synth::PromptTemplate> load_templates(const config::PipelineConfig& cfg) {
  std::map<std::string, synth::PromptTemplate> out = synth::builtin_templates();
  if (cfg.paths.templates.empty()) return out;
  std::vector<fs::path> manifests;
  for (const auto& e : fs::directory_iterator(cfg.paths.templates)) {
    if (e.is_regular_file() && e.path().extension() == ".json") manifests.push_back(e.path());
  }
  std::sort(manifests.begin(), manifests.end());
  for (const auto& m : manifests) {
    const std::string id = m.stem().string();
    out.insert_or_assign(id, synth::PromptTemplate::load(cfg.paths.templates, id));
  }
  return out;
}

const synth::PromptTemplate& find_template(const std::map<std::string, synth::PromptTemplate>& m,
                                           const std::string& id) {
  const auto it = m.find(id);
  if (it == m.end()) throw synth::SynthError("unknown template: " + id);
  return it->second;
}

std::vector<Document> deduped_documents(const std::vector<Document>& docs) {
  std::vector<Document> out;
  for (const auto& d : docs) {
    if (d.status == DocStatus::Deduped) out.push_back(d);
  }
  return out;
}

std::vector<kb::KbChunk> build_index(const config::PipelineConfig& cfg, StageReport& report) {
  std::vector<Document> standards;
  for (auto& d : deduped_documents(corpus::read_store(cfg.corpus_store()))) {
    if (d.source_kind == corpus::SourceKind::Standard) standards.push_back(std::move(d));
  }
  report.inputs.push_back(cfg.corpus_store());
  if (!cfg.paths.kb_source_dir.empty()) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(cfg.paths.kb_source_dir)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    corpus::Corpus extra;
    for (const auto& f : files) {
      const Document& d = extra.ingest(f, corpus::SourceKind::Standard);
      extra.documents().back().source_path = fs::relative(f, cfg.paths.kb_source_dir).generic_string();
      (void)d;
      report.inputs.push_back(f);
    }
    for (auto& d : kernels::extract_batch(extra.documents())) {
      if (d.status == DocStatus::Extracted) standards.push_back(std::move(d));
    }
  }
  return knowledge::build_kb_index(standards, cfg.synth.chunk_len);
}

}  // namespace

nlohmann::ordered_json StageReport::to_json() const {
  nlohmann::ordered_json j;
  j["stage"] = stage;
  j["ok"] = ok();
  j["summary"] = summary;
  j["errors"] = errors;
  return j;
}

std::string digest_paths(const std::vector<fs::path>& paths) {
  Sha256 h;
  for (const auto& p : paths) {
    if (!fs::is_regular_file(p)) continue;
    h.update(p.filename().generic_string()).update(":").update(sha256_file(p)).update("\n");
  }
  return h.hex_digest();
}

void append_run_manifest(const config::PipelineConfig& cfg, const StageReport& report) {
  fs::create_directories(cfg.paths.output_dir);
  nlohmann::ordered_json j;
  j["stage"] = report.stage;
  j["input_digest"] = digest_paths(report.inputs);
  j["output_digest"] = digest_paths(report.outputs);
  j["duration_ms"] = report.duration_ms;
  j["errors"] = report.errors.size();
  std::ofstream out(out_path(cfg, kRunManifest), std::ios::binary | std::ios::app);
  out << j.dump() << '\n';
}

std::map<std::string, double> read_reported_totals(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw evalhsc::EvalError("cannot read reported totals " + path.string());
  std::map<std::string, double> out;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& [k, v] : j.items()) out[k] = v.get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw evalhsc::EvalError(path.string() + ": " + e.what());
  }
  return out;
}

StageReport run_ingest(const config::PipelineConfig& cfg, std::optional<fs::path> single_file,
                       std::optional<corpus::SourceKind> kind) {
  return staged("ingest", [&](StageReport& report) {
    fs::create_directories(cfg.paths.output_dir);
    const fs::path store = cfg.corpus_store();
    corpus::Corpus corpus;
    std::map<std::string, std::size_t> per_kind;
    std::size_t replacements = 0;
    auto account = [&](const Document& d) {
      ++per_kind[std::string(corpus::to_string(d.source_kind))];
      replacements += d.replacement_count;
    };
    if (single_file) {
      if (fs::exists(store)) {
        corpus = corpus::Corpus(corpus::read_store(store));
        report.inputs.push_back(store);
      }
      account(corpus.ingest(*single_file, kind.value_or(corpus::SourceKind::Website)));
      report.inputs.push_back(*single_file);
    } else {
      for (auto k : {corpus::SourceKind::Standard, corpus::SourceKind::Book, corpus::SourceKind::Website}) {
        const fs::path dir = cfg.paths.raw_dir / corpus::to_string(k);
        if (!fs::is_directory(dir)) continue;
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(dir)) {
          if (e.is_regular_file()) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
          try {
            corpus.ingest(f, k);
            corpus.documents().back().source_path = fs::relative(f, cfg.paths.raw_dir).generic_string();
            account(corpus.documents().back());
            report.inputs.push_back(f);
          } catch (const corpus::CorpusError& e) {
            report.errors.emplace_back(e.what());
          }
        }
      }
    }
    corpus::write_store(store, corpus.documents());
    report.outputs.push_back(store);
    std::size_t rejected = 0;
    for (const auto& d : corpus.documents()) rejected += d.rejected() ? 1 : 0;
    report.summary["documents"] = corpus.documents().size();
    report.summary["rejected"] = rejected;
    report.summary["per_kind"] = per_kind;
    report.summary["encoding_replacements"] = replacements;
  });
}

StageReport run_cleanse(const config::PipelineConfig& cfg) {
  return staged("cleanse", [&](StageReport& report) {
    const fs::path store = cfg.corpus_store();
    report.inputs.push_back(store);
    std::vector<Document> docs = kernels::extract_batch(corpus::read_store(store));

    cleanse::Lexicon lexicon(cfg.cleanse.match_mode);
    if (!cfg.paths.lexicon.empty()) {
      lexicon = cleanse::Lexicon::load(cfg.paths.lexicon, cfg.cleanse.match_mode);
      report.inputs.push_back(cfg.paths.lexicon);
    }

    std::size_t no_text = 0;
    std::size_t sensitive = 0;
    std::vector<Document> final_docs;
    std::vector<Document> candidates;
    for (auto& d : docs) {
      if (d.status == DocStatus::Extracted) d = cleanse::filter_sensitive(d, lexicon);
      if (d.rejected()) {
        no_text += d.reject_reason == "no text content" ? 1 : 0;
        sensitive += d.reject_reason.rfind("sensitive:", 0) == 0 ? 1 : 0;
        final_docs.push_back(std::move(d));
      } else {
        candidates.push_back(std::move(d));
      }
    }

    cleanse::DedupResult articles = cleanse::dedup_articles(candidates, cfg.cleanse.near_dup);
    cleanse::DedupResult sentences = cleanse::dedup_sentences(articles.survivors, cfg.cleanse.min_sentence_len);

    cleanse::DedupReport merged;
    merged.articles_in = articles.report.articles_in;
    merged.articles_removed = articles.report.articles_removed + sentences.report.articles_removed;
    merged.sentences_removed = sentences.report.sentences_removed;
    merged.removal_log = articles.report.removal_log;
    merged.removal_log.insert(merged.removal_log.end(), sentences.report.removal_log.begin(),
                              sentences.report.removal_log.end());

    for (auto* group : {&articles.removed, &sentences.removed, &sentences.survivors}) {
      for (auto& d : *group) final_docs.push_back(std::move(d));
    }
    std::sort(final_docs.begin(), final_docs.end(),
              [](const Document& a, const Document& b) { return a.ingest_order < b.ingest_order; });
    corpus::write_store(store, final_docs);

    const fs::path dedup_path = out_path(cfg, kDedupReport);
    write_json(dedup_path, merged.to_json());
    report.summary["documents"] = final_docs.size();
    report.summary["rejected_no_text"] = no_text;
    report.summary["rejected_sensitive"] = sensitive;
    report.summary["articles_in"] = merged.articles_in;
    report.summary["articles_removed"] = merged.articles_removed;
    report.summary["sentences_removed"] = merged.sentences_removed;
    report.summary["surviving"] = sentences.survivors.size();
    report.summary["min_sentence_len"] = cfg.cleanse.min_sentence_len;
    report.summary["match_mode"] = cleanse::to_string(cfg.cleanse.match_mode);
    const fs::path cleanse_path = out_path(cfg, kCleanseReport);
    write_json(cleanse_path, report.summary);
    report.outputs = {store, dedup_path, cleanse_path};
  });
}

StageReport run_kb_build(const config::PipelineConfig& cfg) {
  return staged("kb", [&](StageReport& report) {
    const auto index = build_index(cfg, report);
    const fs::path path = out_path(cfg, kKbIndex);
    knowledge::write_index(path, index);
    report.outputs.push_back(path);
    report.summary["chunks"] = index.size();
    report.summary["chunk_len"] = cfg.synth.chunk_len;
  });
}

std::vector<knowledge::RetrievalHit> run_kb_query(const config::PipelineConfig& cfg, const std::string& query,
                                                  std::size_t k) {
  return knowledge::retrieve(knowledge::read_index(out_path(cfg, kKbIndex)), query, k);
}

StageReport run_synth(const config::PipelineConfig& cfg, chat::ChatClient* client) {
  return staged("synth", [&](StageReport& report) {
    if (client == nullptr) throw synth::SynthError("no client configured");
    const auto templates = load_templates(cfg);
    const auto index = build_index(cfg, report);
    const fs::path index_path = out_path(cfg, kKbIndex);
    knowledge::write_index(index_path, index);

    std::vector<synth::Role> roles;
    for (const auto& name : cfg.synth.roles) roles.push_back(synth::builtin_role(name));
    if (roles.empty()) throw synth::SynthError("no roles configured");

    synth::SynthOptions base;
    base.temperature = cfg.synth.temperature;
    base.max_turns_cap = cfg.synth.max_turns_cap;
    for (const auto& p : cfg.synth.reject_patterns) base.reject_patterns.emplace_back(p);

    synth::SynthesisManifest manifest;
    std::vector<synth::QaRecord> records;
    std::size_t si = 0;
    for (const auto& [key, n] : cfg.synth.target_counts) {
      const synth::Scenario scenario = synth::Scenario::parse(key);
      synth::SynthOptions opts = base;
      opts.seed = cfg.synth.seed + 100003 * si;
      const synth::Role& role = roles[si % roles.size()];
      ++si;
      if (n == 0) continue;
      synth::BatchResult batch = synth::generate_single_turn(
          scenario, role, find_template(templates, cfg.synth.single_turn_template), client, n, opts);
      manifest.add(scenario, batch);
      for (auto& e : batch.errors) report.errors.push_back(key + ": " + e);
      for (auto& r : batch.records) records.push_back(std::move(r));
    }

    const auto& multi_tmpl = find_template(templates, cfg.synth.multi_turn_template);
    si = 0;
    for (const auto& [key, m] : cfg.synth.multi_turn_counts) {
      const synth::Scenario scenario = synth::Scenario::parse(key);
      std::vector<kb::KbChunk> grounding;
      if (!index.empty() && cfg.synth.grounding_k > 0) {
        const std::string query = std::string(synth::chinese_name(scenario.secondary)) + " " +
                                  std::string(synth::to_string(scenario.secondary));
        for (const auto& hit : knowledge::retrieve(index, query, cfg.synth.grounding_k)) {
          const auto it = std::find_if(index.begin(), index.end(),
                                       [&](const kb::KbChunk& c) { return c.id == hit.chunk_id; });
          grounding.push_back(*it);
        }
      }
      for (std::size_t j = 0; j < m; ++j) {
        synth::SynthOptions opts = base;
        opts.seed = cfg.synth.seed + 7919 * (si + 1) + 31 * j;
        try {
          auto rec = synth::generate_multi_turn(scenario, roles, multi_tmpl, client, cfg.synth.max_turns, grounding,
                                                opts);
          manifest.add_multi_turn(rec);
          records.push_back(std::move(rec));
        } catch (const std::exception& e) {
          ++manifest.requested;
          ++manifest.failed;
          manifest.errors.push_back(key + " dialogue " + std::to_string(j) + ": " + e.what());
          report.errors.push_back(manifest.errors.back());
        }
      }
      ++si;
    }

    std::set<std::string> ids;
    for (const auto& r : records) {
      if (!ids.insert(r.id).second) report.errors.push_back("duplicate record id " + r.id);
    }

    const fs::path records_path = out_path(cfg, kRecords);
    synth::write_records(records_path, records);
    nlohmann::ordered_json mj = manifest.to_json();
    mj["production_target"] = cfg.synth.production_target;
    mj["seed"] = cfg.synth.seed;
    mj["model"] = client->model_name();
    const fs::path manifest_path = out_path(cfg, kSynthManifest);
    write_json(manifest_path, mj);
    report.outputs = {index_path, records_path, manifest_path};
    report.summary = mj;
  });
}

StageReport run_validate(const config::PipelineConfig& cfg) {
  return staged("validate", [&](StageReport& report) {
    const fs::path records_path = out_path(cfg, kRecords);
    report.inputs = {records_path, cfg.paths.kg_file};
    const auto kg = knowledge::KnowledgeGraph::load(cfg.paths.kg_file);
    const auto validated = knowledge::validate_records(kg, synth::read_records(records_path));
    std::size_t supported = 0, contradicted = 0, unknown = 0;
    std::vector<std::string> flagged;
    for (const auto& r : validated) {
      for (const auto& v : r.kg_verdicts) {
        supported += v.status == kb::VerdictStatus::Supported;
        contradicted += v.status == kb::VerdictStatus::Contradicted;
        unknown += v.status == kb::VerdictStatus::Unknown;
      }
      if (r.contradicted) flagged.push_back(r.id);
    }
    const fs::path out = out_path(cfg, kValidatedRecords);
    synth::write_records(out, validated);
    report.summary["records"] = validated.size();
    report.summary["kg_triples"] = kg.size();
    report.summary["supported"] = supported;
    report.summary["contradicted"] = contradicted;
    report.summary["unknown"] = unknown;
    report.summary["flagged_records"] = flagged;
    const fs::path rp = out_path(cfg, kKgReport);
    write_json(rp, report.summary);
    report.outputs = {out, rp};
  });
}

StageReport run_export(const config::PipelineConfig& cfg) {
  return staged("export", [&](StageReport& report) {
    const auto& tc = cfg.trainprep.training;
    const fs::path store = cfg.corpus_store();
    const fs::path validated = out_path(cfg, kValidatedRecords);
    report.inputs = {store, validated};
    if (!fs::exists(validated)) {
      throw trainprep::ExportError("no validated records at " + validated.string() + "; run kg check first");
    }

    const fs::path pretrain = out_path(cfg, kPretrain);
    auto pm = trainprep::export_pretrain(deduped_documents(corpus::read_store(store)), tc, pretrain);
    const fs::path pretrain_manifest = out_path(cfg, kPretrainManifest);
    trainprep::write_manifest(pm, pretrain_manifest);

    const fs::path sft = out_path(cfg, kSft);
    auto sm = trainprep::export_sft(synth::read_records(validated), tc, cfg.trainprep.drop_contradicted, sft);
    const fs::path sft_manifest = out_path(cfg, kSftManifest);
    trainprep::write_manifest(sm, sft_manifest);

    const fs::path config_path = out_path(cfg, kTrainingConfig);
    trainprep::emit_training_config(tc, config_path);

    report.summary["pretrain"] = pm.to_json();
    report.summary["sft"] = sm.to_json();
    report.summary["training_config"] = trainprep::to_json(tc);
    report.outputs = {pretrain, pretrain_manifest, sft, sft_manifest, config_path};
  });
}

StageReport run_eval(const config::PipelineConfig& cfg, chat::ChatClient* client) {
  return staged("eval", [&](StageReport& report) {
    fs::create_directories(cfg.paths.output_dir);
    const auto items = evalhsc::read_evalset(cfg.paths.evalset);
    report.inputs.push_back(cfg.paths.evalset);
    const auto schema = cfg.eval.schema.empty() ? evalhsc::canonical_schema() : evalhsc::load_schema(cfg.eval.schema);
    const evalhsc::EvalsetReport set_report = evalhsc::validate_evalset(items, schema);
    for (const auto& e : set_report.errors) report.errors.push_back("eval set: " + e);

    std::vector<evalhsc::ScoreCard> cards;
    std::vector<std::string> clamp_log;
    if (cfg.eval.judge && set_report.pass) {
      if (client == nullptr) throw evalhsc::EvalError("no client configured");
      const auto templates = load_templates(cfg);
      const auto& rubric = find_template(templates, cfg.eval.rubric);
      const std::string model = client->model_name();
      std::vector<std::optional<evalhsc::JudgeResult>> results(items.size());
      std::vector<std::string> errors(items.size());
      const auto n = static_cast<std::int64_t>(items.size());
      const int threads = static_cast<int>(std::max<std::size_t>(1, client->limits().max_in_flight));
#pragma omp parallel for num_threads(threads) schedule(dynamic, 1)
      for (std::int64_t k = 0; k < n; ++k) {
        const auto i = static_cast<std::size_t>(k);
        const std::uint64_t seed = cfg.synth.seed + i;
        try {
          const std::string response =
              client->send("你是人居环境建设领域的专家，请回答评测问题。", {{"user", items[i].question}},
                           cfg.synth.temperature, seed);
          results[i] = evalhsc::judge_scores(items[i], model, response, client, rubric, seed,
                                             cfg.eval.judge_attempts);
        } catch (const std::exception& e) {
          errors[i] = "item " + items[i].id + ": " + e.what();
        }
      }
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (!results[i]) {
          report.errors.push_back(errors[i]);
          continue;
        }
        for (const auto& c : results[i]->clamp_log) clamp_log.push_back(items[i].id + ": " + c);
        cards.push_back(results[i]->card);
      }
    }
    if (!cfg.paths.scores_csv.empty()) {
      auto imported = evalhsc::read_scores_csv(cfg.paths.scores_csv);
      report.inputs.push_back(cfg.paths.scores_csv);
      cards.insert(cards.end(), imported.begin(), imported.end());
    }
    std::map<std::string, double> totals;
    if (!cfg.paths.reported_totals.empty()) {
      totals = read_reported_totals(cfg.paths.reported_totals);
      report.inputs.push_back(cfg.paths.reported_totals);
    }

    const fs::path scores_path = out_path(cfg, kScores);
    write_text(scores_path, evalhsc::format_scores_csv(cards));

    nlohmann::ordered_json j;
    j["evalset"] = set_report.to_json();
    j["ranking_key"] = evalhsc::to_string(cfg.eval.ranking_key);
    j["clamp_log"] = clamp_log;
    auto models = nlohmann::ordered_json::array();
    std::string table;
    if (!cards.empty()) {
      const auto ranked = evalhsc::rank_models(evalhsc::reports_by_model(cards, totals), cfg.eval.ranking_key);
      for (const auto& r : ranked) models.push_back(r.to_json());
      nlohmann::ordered_json leaders;
      for (const auto& [d, m] : evalhsc::dimension_leaders(ranked)) leaders[std::string(evalhsc::to_string(d))] = m;
      j["dimension_leaders"] = std::move(leaders);
      table = evalhsc::format_table(ranked);
    }
    j["models"] = std::move(models);
    const fs::path report_path = out_path(cfg, kEvalReport);
    const fs::path table_path = out_path(cfg, kEvalTable);
    write_json(report_path, j);
    write_text(table_path, table);
    report.summary = j;
    report.outputs = {scores_path, report_path, table_path};
  });
}

StageReport run_report(const config::PipelineConfig& cfg, evalhsc::RankKey key, const fs::path& scores_csv,
                       const fs::path& totals_json) {
  return staged("report", [&](StageReport& report) {
    fs::create_directories(cfg.paths.output_dir);
    const auto cards = evalhsc::read_scores_csv(scores_csv);
    report.inputs.push_back(scores_csv);
    std::map<std::string, double> totals;
    if (!totals_json.empty()) {
      totals = read_reported_totals(totals_json);
      report.inputs.push_back(totals_json);
    }
    const auto ranked = evalhsc::rank_models(evalhsc::reports_by_model(cards, totals), key);
    nlohmann::ordered_json j;
    j["ranking_key"] = evalhsc::to_string(key);
    auto models = nlohmann::ordered_json::array();
    for (const auto& r : ranked) models.push_back(r.to_json());
    j["models"] = std::move(models);
    nlohmann::ordered_json leaders;
    for (const auto& [d, m] : evalhsc::dimension_leaders(ranked)) leaders[std::string(evalhsc::to_string(d))] = m;
    j["dimension_leaders"] = std::move(leaders);
    const fs::path json_path = out_path(cfg, kReport);
    const fs::path table_path = out_path(cfg, kReportTable);
    write_json(json_path, j);
    write_text(table_path, evalhsc::format_table(ranked));
    report.summary = j;
    report.outputs = {json_path, table_path};
  });
}

std::vector<StageReport> run_pipeline(const config::PipelineConfig& cfg, chat::ChatClient* client) {
  std::vector<StageReport> reports;
  auto step = [&](StageReport r) {
    append_run_manifest(cfg, r);
    reports.push_back(std::move(r));
    return reports.back().ok();
  };
  if (!step(run_ingest(cfg))) return reports;
  if (!step(run_cleanse(cfg))) return reports;
  if (!step(run_synth(cfg, client))) return reports;
  if (!step(run_validate(cfg))) return reports;
  if (!step(run_export(cfg))) return reports;
  if (!cfg.paths.evalset.empty()) step(run_eval(cfg, client));
  return reports;
}

}  // namespace settlekit::pipeline
