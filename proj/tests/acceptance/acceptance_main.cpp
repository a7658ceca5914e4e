// Acceptance suite: one PASS/FAIL line per criterion, failing checks listed
// beneath. Exit status is non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "settlekit/cleanse.hpp"
#include "settlekit/config.hpp"
#include "settlekit/evalhsc.hpp"
#include "settlekit/knowledge.hpp"
#include "settlekit/pipeline.hpp"
#include "settlekit/trainprep.hpp"
#include "support/cli.hpp"
#include "support/dedup_oracle.hpp"
#include "support/eval_fixtures.hpp"
#include "support/fixture_loaders.hpp"
#include "support/retrieval_oracle.hpp"
#include "support/test_support.hpp"

using namespace settlekit;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

class Criterion {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool passed() const { return failures_.empty(); }
  const std::vector<std::string>& failures() const { return failures_; }
  const std::vector<std::string>& notes() const { return notes_; }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += line.empty() ? 0 : 1;
  return n;
}

// ---------------------------------------------------------------- 1

struct DedupRun {
  std::vector<corpus::Document> all;
  std::size_t articles_removed = 0;
  std::size_t sentences_removed = 0;
  std::vector<std::tuple<std::uint64_t, long, std::uint64_t, long>> log;
};

DedupRun dedup_pass(const std::vector<corpus::Document>& docs, std::size_t min_len) {
  auto a = cleanse::dedup_articles(docs);
  auto s = cleanse::dedup_sentences(a.survivors, min_len);
  DedupRun r;
  for (auto* g : {&a.removed, &s.removed, &s.survivors}) r.all.insert(r.all.end(), g->begin(), g->end());
  std::sort(r.all.begin(), r.all.end(), [](const auto& x, const auto& y) { return x.ingest_order < y.ingest_order; });
  r.articles_removed = a.report.articles_removed + s.report.articles_removed;
  r.sentences_removed = s.report.sentences_removed;
  for (const auto* rep : {&a.report, &s.report}) {
    for (const auto& e : rep->removal_log) {
      r.log.emplace_back(e.doc_order, e.sentence_index ? static_cast<long>(*e.sentence_index) : -1,
                         e.duplicate_of_order, e.duplicate_of_sentence ? static_cast<long>(*e.duplicate_of_sentence) : -1);
    }
  }
  return r;
}

void criterion_dedup(Criterion& c) {
  const auto planted = testing::planted_corpus(500, 2024);
  c.expect(planted.planted_article_dups >= 50, "fewer than 10% planted article duplicates");
  c.expect(planted.planted_sentence_dups >= 50, "fewer than 10% planted sentence duplicates");

  const auto t0 = Clock::now();
  const DedupRun got = dedup_pass(planted.docs, 30);
  const double secs = seconds_since(t0);
  const auto want = testing::dedup_oracle(planted.docs, 30);

  bool identical = got.all.size() == want.docs.size();
  for (std::size_t i = 0; identical && i < got.all.size(); ++i) {
    const auto& g = got.all[i];
    const auto& w = want.docs[i];
    identical = g.ingest_order == w.ingest_order && g.status == w.status && g.clean_text == w.clean_text &&
                g.reject_reason == w.reject_reason && g.id == w.id;
  }
  c.expect(identical, "document states differ from the oracle");
  c.expect(got.articles_removed == want.articles_removed, "article removal count differs from the oracle");
  c.expect(got.sentences_removed == want.sentences_removed, "sentence removal count differs from the oracle");
  c.expect(got.log == want.log, "removal log differs from the oracle");
  c.expect(secs < 10.0, "runtime " + fmt("%.2f", secs) + " s is not under 10 s");

  std::vector<corpus::Document> survivors;
  for (const auto& d : got.all) {
    if (!d.rejected()) survivors.push_back(d);
  }
  const DedupRun second = dedup_pass(survivors, 30);
  c.expect(second.articles_removed == 0 && second.sentences_removed == 0, "second pass removed content");
  c.note(std::to_string(planted.planted_article_dups) + " planted article dups, " +
         std::to_string(planted.planted_sentence_dups) + " planted sentence dups; removed " +
         std::to_string(got.articles_removed) + " articles and " + std::to_string(got.sentences_removed) +
         " sentences in " + fmt("%.3f", secs) + " s");
}

// ---------------------------------------------------------------- 2

bool has_error(const evalhsc::EvalsetReport& r, const std::string& msg) {
  return std::find(r.errors.begin(), r.errors.end(), msg) != r.errors.end();
}

void criterion_schema(Criterion& c) {
  const std::vector<std::pair<evalhsc::Dimension, std::pair<std::size_t, std::size_t>>> table4{
      {evalhsc::Dimension::Relevance, {4, 50}},  {evalhsc::Dimension::Comprehensiveness, {5, 63}},
      {evalhsc::Dimension::Utility, {4, 50}},    {evalhsc::Dimension::Expertise, {6, 74}},
      {evalhsc::Dimension::Originality, {3, 38}}, {evalhsc::Dimension::Depth, {2, 25}}};
  const auto& schema = evalhsc::canonical_schema();
  c.expect(schema.size() == table4.size(), "schema does not have six categories");
  for (std::size_t i = 0; i < std::min(schema.size(), table4.size()); ++i) {
    c.expect(schema[i].dimension == table4[i].first && schema[i].subclass_count == table4[i].second.first &&
                 schema[i].question_count == table4[i].second.second,
             "schema row " + std::to_string(i) + " differs from the statistics table");
  }
  const auto items = testing::canonical_skeleton();
  const auto base = evalhsc::validate_evalset(items);
  c.expect(base.pass && base.total_questions == 300 && base.total_subclasses == 24, "canonical item set fails");

  auto count_of = [&](evalhsc::Dimension d) {
    for (const auto& [dim, counts] : table4) {
      if (dim == d) return counts.second;
    }
    return std::size_t{0};
  };
  std::size_t perturbations = 0;
  std::size_t imprecise = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto d = items[i].dimension;
    const std::string name(evalhsc::to_string(d));
    const std::size_t n = count_of(d);

    auto removed = items;
    removed.erase(removed.begin() + static_cast<std::ptrdiff_t>(i));
    auto r = evalhsc::validate_evalset(removed);
    imprecise += (!r.pass && has_error(r, name + ": expected " + std::to_string(n) + ", got " + std::to_string(n - 1)))
                     ? 0
                     : 1;

    auto moved = items;
    const auto other = evalhsc::kDimensions[(static_cast<std::size_t>(d) + 1) % evalhsc::kDimensionCount];
    moved[i].dimension = other;
    r = evalhsc::validate_evalset(moved);
    const std::size_t m = count_of(other);
    imprecise += (!r.pass && has_error(r, name + ": expected " + std::to_string(n) + ", got " + std::to_string(n - 1)) &&
                  has_error(r, std::string(evalhsc::to_string(other)) + ": expected " + std::to_string(m) + ", got " +
                                   std::to_string(m + 1)))
                     ? 0
                     : 1;

    auto duplicated = items;
    duplicated.push_back(items[i]);
    duplicated.back().id += "-copy";
    r = evalhsc::validate_evalset(duplicated);
    imprecise += (!r.pass && has_error(r, name + ": expected " + std::to_string(n) + ", got " + std::to_string(n + 1)) &&
                  has_error(r, "total: expected 300 questions, got 301"))
                     ? 0
                     : 1;
    perturbations += 3;
  }
  c.expect(imprecise == 0, std::to_string(imprecise) + " perturbations without the precise message");
  c.note(std::to_string(perturbations) + " single-item perturbations checked");
}

// ---------------------------------------------------------------- 3

void criterion_score_table(Criterion& c) {
  const auto cards = evalhsc::read_scores_csv(testing::fixture("pipeline/published_scores.csv"));
  const auto totals = pipeline::read_reported_totals(testing::fixture("pipeline/published_totals.json"));
  auto reports = evalhsc::reports_by_model(cards, totals);
  const std::map<std::string, double> sums{{"Baichuan", 49.38}, {"Alpaca", 54.93}, {"ChatGLM", 50.27}, {"HSCGPT", 55.59}};
  for (const auto& r : reports) {
    const double expected = sums.at(r.model_name);
    c.expect(std::fabs(r.dimension_sum - expected) <= 1e-9,
             r.model_name + " dimension sum " + fmt("%.12f", r.dimension_sum) + " != " + fmt("%.2f", expected));
    const auto& row = *std::find_if(testing::published_scores().begin(), testing::published_scores().end(),
                                    [&](const auto& t) { return r.model_name == t.model; });
    c.expect(r.per_dimension_mean == row.scores, r.model_name + " imported scores differ from the table");
  }
  const auto ranked = evalhsc::rank_models(reports, evalhsc::RankKey::ReportedTotal);
  std::vector<std::string> order;
  for (const auto& r : ranked) order.push_back(r.model_name);
  c.expect(order == std::vector<std::string>{"HSCGPT", "Alpaca", "ChatGLM", "Baichuan"},
           "reported-total ranking is not HSCGPT > Alpaca > ChatGLM > Baichuan");

  const auto leaders = evalhsc::dimension_leaders(reports);
  const std::vector<std::pair<evalhsc::Dimension, std::string>> claimed{
      {evalhsc::Dimension::Expertise, "HSCGPT"},       {evalhsc::Dimension::Depth, "HSCGPT"},
      {evalhsc::Dimension::Comprehensiveness, "Alpaca"}, {evalhsc::Dimension::Originality, "Alpaca"},
      {evalhsc::Dimension::Relevance, "ChatGLM"},      {evalhsc::Dimension::Utility, "ChatGLM"}};
  for (const auto& [dim, model] : claimed) {
    const auto& actual = leaders.at(dim);
    c.expect(actual == model, std::string(evalhsc::to_string(dim)) + " leader is " + actual + ", claimed " + model);
  }
}

// ---------------------------------------------------------------- 4

void criterion_threshold(Criterion& c) {
  auto report_at = [](double v) {
    evalhsc::Scores s;
    s.fill(v);
    return evalhsc::build_report("m", {{"m", "q", s}});
  };
  const auto exact = report_at(8.0);
  const auto above = report_at(8.0 + 1e-9);
  c.expect(exact.composite_mean == 8.0, "composite of all-8 cards is not exactly 8.0");
  c.expect(!exact.high_quality, "composite 8.0 marked high-quality");
  c.expect(above.composite_mean > 8.0, "composite 8.0 + 1e-9 is not above 8.0");
  c.expect(above.high_quality, "composite 8.0 + 1e-9 not marked high-quality");
}

// ---------------------------------------------------------------- 5

void criterion_training_config(Criterion& c) {
  testing::TempDir tmp;
  const trainprep::TrainingConfig defaults;
  trainprep::emit_training_config(defaults, tmp / "training_config.json");
  const auto back = trainprep::read_training_config(tmp / "training_config.json");
  c.expect(back == defaults, "emitted config does not round-trip");
  c.expect(back.precision == "fp16", "precision is not fp16");
  c.expect(back.epochs == 3, "epochs is not 3");
  c.expect(back.batch_size == 64, "batch size is not 64");
  c.expect(back.learning_rate == 1e-4, "learning rate is not 1e-4");
  c.expect(back.warmup_ratio == 0.1, "warmup ratio is not 0.1");
  c.expect(back.lr_scheduler_type == "cosine", "scheduler is not cosine");
  c.expect(back.truncation_length == 1024, "truncation length is not 1024");

  std::mt19937 rng(5);
  const std::vector<std::string> pieces{"海绵城市", "rain garden ", "社区公园。", "e\xCC\x81", "湿地 wetland. "};
  std::vector<corpus::Document> docs;
  std::vector<synth::QaRecord> records;
  for (int i = 0; i < 40; ++i) {
    std::string text;
    const int reps = static_cast<int>(rng() % 700);
    for (int r = 0; r < reps; ++r) text += pieces[rng() % pieces.size()];
    text += std::to_string(i);
    corpus::Document d;
    d.ingest_order = static_cast<std::uint64_t>(i);
    d.raw_text = text;
    d.clean_text = text;
    d.status = corpus::DocStatus::Deduped;
    docs.push_back(d);
    synth::QaRecord rec;
    rec.id = "r" + std::to_string(i);
    rec.scenario = synth::Scenario::parse("DesignPhilosophy/SpongeCity");
    rec.turns.push_back({"resident", text, text + text});
    records.push_back(rec);
  }
  const auto pm = trainprep::export_pretrain(docs, defaults, tmp / "pretrain.jsonl");
  const auto sm = trainprep::export_sft(records, defaults, true, tmp / "sft.jsonl");
  c.expect(pm.truncated_records > 0 && sm.truncated_records > 0, "fixture exercised no truncation");

  std::size_t scanned = 0;
  std::size_t over = 0;
  auto scan = [&](const std::string& s) {
    ++scanned;
    over += trainprep::unit_length(s) > 1024 ? 1 : 0;
  };
  std::ifstream p(tmp / "pretrain.jsonl");
  for (std::string line; std::getline(p, line);) scan(nlohmann::json::parse(line).at("text").get<std::string>());
  std::ifstream s(tmp / "sft.jsonl");
  for (std::string line; std::getline(s, line);) {
    const auto record = nlohmann::json::parse(line);
    for (const auto& m : record.at("conversations")) scan(m.at("content").get<std::string>());
  }
  c.expect(scanned == 40 + 80, "full-file scan saw " + std::to_string(scanned) + " texts, expected 120");
  c.expect(over == 0, std::to_string(over) + " exported texts exceed 1024 units");
  c.note(std::to_string(scanned) + " exported texts scanned");
}

// ---------------------------------------------------------------- 6, 9

// Two pipeline runs over the fixture inputs, shared by criteria 6 and 9.
struct PipelineRuns {
  testing::TempDir tmp;
  testing::CliRun first, second;
  double first_seconds = 0.0;
  fs::path out_a = tmp / "run_a";
  fs::path out_b = tmp / "run_b";

  PipelineRuns() {
    const std::string cfg = "-c " + testing::quoted(testing::fixture("pipeline/config.json"));
    const auto t0 = Clock::now();
    first = testing::run_cli(cfg + " -o " + testing::quoted(out_a) + " pipeline", tmp.path());
    first_seconds = seconds_since(t0);
    second = testing::run_cli(cfg + " -o " + testing::quoted(out_b) + " pipeline", tmp.path());
  }
};

PipelineRuns& pipeline_runs() {
  static PipelineRuns runs;
  return runs;
}

void criterion_determinism(Criterion& c) {
  auto& runs = pipeline_runs();
  c.expect(runs.first.exit_code == 0 && runs.second.exit_code == 0, "a pipeline run failed");
  const auto a = testing::slurp(runs.out_a / pipeline::kRecords);
  const auto b = testing::slurp(runs.out_b / pipeline::kRecords);
  c.expect(!a.empty() && a == b, "QA record files differ between runs");

  const auto cfg = config::load_config(testing::fixture("pipeline/config.json"));
  const auto& roles = cfg.synth.roles;
  std::size_t multi = 0;
  std::size_t bad_turns = 0;
  const auto records = synth::read_records(runs.out_a / pipeline::kRecords);
  for (const auto& rec : records) {
    if (rec.turns.size() < 2) continue;
    ++multi;
    for (std::size_t t = 0; t < rec.turns.size(); ++t) {
      const bool cyclic = rec.turns[t].role == roles[t % roles.size()];
      const bool changes = t == 0 || rec.turns[t].role != rec.turns[t - 1].role;
      bad_turns += cyclic && changes ? 0 : 1;
    }
  }
  c.expect(multi > 0, "no multi-turn records produced");
  c.expect(bad_turns == 0, std::to_string(bad_turns) + " multi-turn turns break role alternation");

  const auto m = nlohmann::json::parse(testing::slurp(runs.out_a / pipeline::kSynthManifest));
  std::size_t configured = 0;
  for (const auto& [k, n] : cfg.synth.target_counts) configured += n;
  for (const auto& [k, n] : cfg.synth.multi_turn_counts) configured += n;
  std::size_t per_scenario = 0;
  for (const auto* section : {"single_turn", "multi_turn"}) {
    for (const auto& [k, n] : m.at(section).items()) per_scenario += n.get<std::size_t>();
  }
  const auto requested = m.at("requested").get<std::size_t>();
  const auto emitted = m.at("emitted").get<std::size_t>();
  c.expect(requested == configured, "requested " + std::to_string(requested) + " != configured " +
                                        std::to_string(configured));
  c.expect(requested == emitted + m.at("dropped_empty").get<std::size_t>() +
                             m.at("dropped_filtered").get<std::size_t>() + m.at("failed").get<std::size_t>(),
           "requested != emitted + dropped + failed");
  c.expect(emitted == records.size(), "emitted count differs from the record file");
  c.expect(per_scenario == emitted, "per-scenario counts do not add up to emitted");
  c.note(std::to_string(records.size()) + " records, " + std::to_string(multi) + " multi-turn");
}

void criterion_smoke(Criterion& c) {
  auto& runs = pipeline_runs();
  c.expect(runs.first.exit_code == 0, "pipeline exit code " + std::to_string(runs.first.exit_code) + ": " +
                                          runs.first.err);
  c.expect(runs.first_seconds < 60.0, "pipeline took " + fmt("%.1f", runs.first_seconds) + " s");
  for (const char* name : {pipeline::kPretrain, pipeline::kSft, pipeline::kRunManifest, pipeline::kSynthManifest,
                           pipeline::kSftManifest, pipeline::kEvalReport}) {
    const auto p = runs.out_a / name;
    c.expect(fs::exists(p) && fs::file_size(p) > 0, std::string(name) + " is missing or empty");
  }
  c.expect(line_count(runs.out_a / pipeline::kRunManifest) == 6, "run manifest does not list six stages");
  c.note("pipeline finished in " + fmt("%.2f", runs.first_seconds) + " s");
}

// ---------------------------------------------------------------- 7

void criterion_kg(Criterion& c) {
  const auto kg = knowledge::KnowledgeGraph::load(testing::fixture("kg/graph20.tsv"));
  c.expect(kg.size() == 20, "graph does not hold 20 triples");
  c.expect(kg.functional_predicates().size() == 3, "graph does not declare 3 functional predicates");
  const auto claims = testing::labelled_claims(testing::fixture("kg/claims30.tsv"));
  c.expect(claims.size() == 30, "claim suite does not hold 30 claims");
  for (const auto& [claim, expected] : claims) {
    const auto v = knowledge::validate_claim(kg, claim);
    c.expect(v.status == expected, knowledge::format_triple(claim) + " judged " + std::string(kb::to_string(v.status)) +
                                       ", labelled " + std::string(kb::to_string(expected)));
  }

  std::mt19937 rng(99);
  auto grown = kg;
  std::vector<kb::Triple> probes;
  for (const auto& [claim, expected] : claims) probes.push_back(claim);
  const auto subjects = [&] {
    std::vector<std::string> s;
    for (const auto& t : kg.triples()) s.push_back(t.subject);
    return s;
  }();
  const std::vector<std::string> preds{"located_in", "designed_by", "has_area_ha", "features", "is_a"};
  std::size_t violations = 0;
  for (int step = 0; step < 100; ++step) {
    std::vector<kb::VerdictStatus> before;
    for (const auto& p : probes) before.push_back(knowledge::validate_claim(grown, p).status);
    const kb::Triple t{subjects[rng() % subjects.size()], preds[rng() % preds.size()], "o" + std::to_string(rng() % 7)};
    try {
      grown.insert(t);
    } catch (const knowledge::KnowledgeError&) {
    }
    probes.push_back(t);
    for (std::size_t i = 0; i < before.size(); ++i) {
      const auto now = knowledge::validate_claim(grown, probes[i]).status;
      if (before[i] != kb::VerdictStatus::Unknown && now != before[i]) ++violations;
    }
  }
  c.expect(violations == 0, std::to_string(violations) + " verdicts changed after insertion");
  c.note("graph grew to " + std::to_string(grown.size()) + " triples over 100 insertions");
}

// ---------------------------------------------------------------- 8

void criterion_retrieval(Criterion& c) {
  const auto rows = testing::chunk_rows(testing::fixture("kb/chunks50.tsv"));
  c.expect(rows.size() == 50, "chunk fixture does not hold 50 chunks");
  const auto index = testing::chunks_from_rows(rows);
  const auto queries = testing::data_lines(testing::fixture("kb/queries10.txt"));
  c.expect(queries.size() == 10, "query fixture does not hold 10 queries");
  for (const auto& q : queries) {
    const auto got = knowledge::retrieve(index, q, 10);
    const auto want = testing::brute_force_rank(rows, q, 10);
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < got.size(); ++i) {
      same = got[i].chunk_id == want[i].first && std::fabs(got[i].score - want[i].second) <= 1e-12;
    }
    c.expect(same, "ranking differs for query '" + q + "'");
  }
  const auto tie = knowledge::retrieve(index, "rooftop cistern", 2);
  c.expect(tie.size() == 2 && tie[0].score == tie[1].score && tie[0].chunk_id == "c17" && tie[1].chunk_id == "c41",
           "constructed tie not broken by ascending chunk id");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Criterion&)>>> criteria{
      {"dedup oracle equivalence", criterion_dedup},
      {"evaluation schema reproduction", criterion_schema},
      {"score table arithmetic", criterion_score_table},
      {"high-quality threshold", criterion_threshold},
      {"training config fidelity", criterion_training_config},
      {"synthesis determinism", criterion_determinism},
      {"knowledge graph validation", criterion_kg},
      {"retrieval oracle", criterion_retrieval},
      {"end-to-end smoke", criterion_smoke},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Criterion c;
    try {
      criteria[i].second(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    std::cout << (c.passed() ? "PASS" : "FAIL") << "  criterion " << i + 1 << ": " << criteria[i].first << '\n';
    for (const auto& n : c.notes()) std::cout << "        " << n << '\n';
    for (const auto& f : c.failures()) std::cout << "      x " << f << '\n';
    failed += c.passed() ? 0 : 1;
  }
  std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
