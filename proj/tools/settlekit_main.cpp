#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "settlekit/config.hpp"
#include "settlekit/corpus.hpp"
#include "settlekit/kernels.hpp"
#include "settlekit/knowledge.hpp"
#include "settlekit/pipeline.hpp"

namespace fs = std::filesystem;
using namespace settlekit;

namespace {

struct GlobalFlags {
  std::string config_path;
  std::string output_dir;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  bool json = false;
};

void print_scalar_summary(const nlohmann::ordered_json& summary) {
  for (const auto& [k, v] : summary.items()) {
    if (v.is_primitive()) std::cout << "  " << k << ": " << v.dump() << '\n';
  }
}

int emit(const std::vector<pipeline::StageReport>& reports, bool json) {
  bool ok = true;
  if (json) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : reports) arr.push_back(r.to_json());
    std::cout << arr.dump(2) << '\n';
  }
  for (const auto& r : reports) {
    ok = ok && r.ok();
    if (!json) {
      char head[128];
      std::snprintf(head, sizeof head, "[%s] %s (%.1f ms)", r.stage.c_str(), r.ok() ? "ok" : "FAILED", r.duration_ms);
      std::cout << head << '\n';
      print_scalar_summary(r.summary);
    }
    for (const auto& e : r.errors) std::cerr << r.stage << ": " << e << '\n';
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"settlekit: corpus preparation, synthesis, knowledge checks and evaluation for a settlement-domain model"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags g;
  app.add_option("-c,--config", g.config_path, "Pipeline configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("-o,--output-dir", g.output_dir, "Output directory (overrides paths.output_dir)");
  app.add_option("-w,--workers", g.workers, "Worker threads for parallel stages (0 = all cores)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--seed", g.seed, "Synthesis seed (overrides synth.seed)");
  app.add_flag("--json", g.json, "Print stage reports as JSON");

  auto* ingest = app.add_subcommand("ingest", "Ingest raw documents into the corpus store");
  std::string ingest_file, ingest_kind = "website";
  ingest->add_option("--file", ingest_file, "Ingest one file and append it to the store")->check(CLI::ExistingFile);
  ingest->add_option("--kind", ingest_kind, "Source kind for --file")
      ->check(CLI::IsMember({"standard", "book", "website"}));

  auto* cleanse_cmd = app.add_subcommand("cleanse", "Extract text, filter sensitive terms, deduplicate");
  std::optional<std::size_t> min_len;
  std::string lexicon, match_mode;
  cleanse_cmd->add_option("--min-sentence-len", min_len, "Minimum normalized sentence length for sentence dedup");
  cleanse_cmd->add_option("--lexicon", lexicon, "Sensitive-term lexicon file")->check(CLI::ExistingFile);
  cleanse_cmd->add_option("--match-mode", match_mode, "Lexicon match mode")
      ->check(CLI::IsMember({"substring", "whole-token"}));

  auto* synth_cmd = app.add_subcommand("synth", "Generate QA records with the configured chat client");

  auto* kb_cmd = app.add_subcommand("kb", "Knowledge-base index");
  kb_cmd->require_subcommand(1);
  kb_cmd->add_subcommand("build", "Build the chunk index from deduped standards");
  auto* kb_query = kb_cmd->add_subcommand("query", "Rank indexed chunks against a query");
  std::string query_text;
  std::size_t query_k = 5;
  kb_query->add_option("text", query_text, "Query text")->required();
  kb_query->add_option("--k", query_k, "Number of hits")->check(CLI::PositiveNumber);

  auto* kg_cmd = app.add_subcommand("kg", "Knowledge-graph validation");
  kg_cmd->require_subcommand(1);
  kg_cmd->add_subcommand("check", "Validate synthesized records against the graph");
  auto* kg_claim = kg_cmd->add_subcommand("claim", "Check a single claim");
  std::vector<std::string> claim;
  kg_claim->add_option("triple", claim, "SUBJECT PREDICATE OBJECT")->required()->expected(3);

  auto* export_cmd = app.add_subcommand("export", "Write pretraining and SFT exports plus the training config");
  bool keep_contradicted = false;
  export_cmd->add_flag("--keep-contradicted", keep_contradicted, "Keep records flagged by the knowledge graph");

  auto* eval_cmd = app.add_subcommand("eval", "Validate the eval set, judge responses, rank models");

  auto* report_cmd = app.add_subcommand("report", "Rank models from a scores CSV");
  std::string report_key, report_scores, report_totals;
  report_cmd->add_option("--key", report_key, "Ranking key")
      ->check(CLI::IsMember({"dimension-sum", "composite-mean", "reported-total"}));
  report_cmd->add_option("--scores", report_scores, "Scores CSV (overrides paths.scores_csv)")
      ->check(CLI::ExistingFile);
  report_cmd->add_option("--totals", report_totals, "Reported totals JSON (overrides paths.reported_totals)")
      ->check(CLI::ExistingFile);

  auto* pipeline_cmd = app.add_subcommand("pipeline", "ingest, cleanse, synth, validate, export, and eval if configured");

  CLI11_PARSE(app, argc, argv);

  config::PipelineConfig cfg;
  try {
    if (!g.config_path.empty()) cfg = config::load_config(g.config_path);
    if (!g.output_dir.empty()) cfg.paths.output_dir = g.output_dir;
    if (g.workers) cfg.workers = *g.workers;
    if (g.seed) cfg.synth.seed = *g.seed;
    if (min_len) cfg.cleanse.min_sentence_len = *min_len;
    if (!lexicon.empty()) cfg.paths.lexicon = lexicon;
    if (!match_mode.empty()) cfg.cleanse.match_mode = cleanse::parse_match_mode(match_mode);
    if (keep_contradicted) cfg.trainprep.drop_contradicted = false;
    if (!report_scores.empty()) cfg.paths.scores_csv = report_scores;
    if (!report_totals.empty()) cfg.paths.reported_totals = report_totals;
    if (!report_key.empty()) cfg.eval.ranking_key = evalhsc::parse_rank_key(report_key);

    std::vector<std::string> stages;
    if (*ingest && ingest_file.empty()) stages = {"ingest"};
    if (*cleanse_cmd) stages = {"cleanse"};
    if (*synth_cmd) stages = {"synth"};
    if (*kb_cmd) stages = {"kb"};
    if (*kg_cmd) stages = {"kg"};
    if (*eval_cmd) stages = {"eval"};
    if (*report_cmd) stages = {"report"};
    if (*pipeline_cmd) {
      stages = {"ingest", "cleanse", "synth", "validate", "export"};
      if (!cfg.paths.evalset.empty()) stages.push_back("eval");
    }
    config::validate_paths(cfg, stages);
    if (*report_cmd && cfg.paths.scores_csv.empty()) {
      throw config::ConfigError({"report: --scores or paths.scores_csv is required"});
    }
  } catch (const config::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return 2;
  }
  kernels::set_worker_count(cfg.workers);

  auto client_for = [&]() -> std::unique_ptr<chat::ChatClient> { return config::make_client(cfg.synth); };
  auto single = [&](pipeline::StageReport r) {
    pipeline::append_run_manifest(cfg, r);
    return emit({std::move(r)}, g.json);
  };

  try {
    if (*ingest) {
      if (ingest_file.empty()) return single(pipeline::run_ingest(cfg));
      return single(pipeline::run_ingest(cfg, fs::path(ingest_file), corpus::parse_source_kind(ingest_kind)));
    }
    if (*cleanse_cmd) return single(pipeline::run_cleanse(cfg));
    if (*synth_cmd) {
      auto client = client_for();
      return single(pipeline::run_synth(cfg, client.get()));
    }
    if (*kb_cmd) {
      if (kb_cmd->got_subcommand("build")) return single(pipeline::run_kb_build(cfg));
      const auto hits = pipeline::run_kb_query(cfg, query_text, query_k);
      if (g.json) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& h : hits) arr.push_back({{"chunk_id", h.chunk_id}, {"score", h.score}});
        std::cout << arr.dump(2) << '\n';
      } else {
        for (const auto& h : hits) {
          char line[160];
          std::snprintf(line, sizeof line, "%-24s %.6f", h.chunk_id.c_str(), h.score);
          std::cout << line << '\n';
        }
      }
      return 0;
    }
    if (*kg_cmd) {
      if (kg_cmd->got_subcommand("check")) return single(pipeline::run_validate(cfg));
      const auto kg = knowledge::KnowledgeGraph::load(cfg.paths.kg_file);
      const auto v = knowledge::validate_claim(kg, knowledge::make_triple(claim[0], claim[1], claim[2]));
      if (g.json) {
        nlohmann::ordered_json j;
        j["claim"] = knowledge::format_triple(v.claim);
        j["status"] = kb::to_string(v.status);
        j["witness"] = v.witness ? nlohmann::ordered_json(knowledge::format_triple(*v.witness)) : nullptr;
        std::cout << j.dump(2) << '\n';
      } else {
        std::cout << kb::to_string(v.status);
        if (v.witness) std::cout << ' ' << knowledge::format_triple(*v.witness);
        std::cout << '\n';
      }
      return 0;
    }
    if (*export_cmd) return single(pipeline::run_export(cfg));
    if (*eval_cmd) {
      std::unique_ptr<chat::ChatClient> client;
      if (cfg.eval.judge) client = client_for();
      return single(pipeline::run_eval(cfg, client.get()));
    }
    if (*report_cmd) {
      return single(pipeline::run_report(cfg, cfg.eval.ranking_key, cfg.paths.scores_csv, cfg.paths.reported_totals));
    }
    if (*pipeline_cmd) {
      auto client = client_for();
      return emit(pipeline::run_pipeline(cfg, client.get()), g.json);
    }
  } catch (const config::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
