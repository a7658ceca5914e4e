#include <doctest.h>

#include <cmath>

#include "settlekit/evalhsc.hpp"
#include "support/eval_fixtures.hpp"
#include "support/test_support.hpp"

using namespace settlekit;
using evalhsc::Dimension;
using evalhsc::RankKey;

namespace {

std::string joined(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& e : v) s += e + "\n";
  return s;
}

}  // namespace

TEST_CASE("dimension names and synonyms") {
  CHECK(evalhsc::parse_dimension("completeness") == Dimension::Comprehensiveness);
  CHECK(evalhsc::parse_dimension("Practicality") == Dimension::Utility);
  CHECK(evalhsc::parse_dimension("PROFESSIONALISM") == Dimension::Expertise);
  CHECK(evalhsc::parse_dimension(" depth ") == Dimension::Depth);
  CHECK_THROWS_AS(evalhsc::parse_dimension("fluency"), evalhsc::EvalError);
  for (auto d : evalhsc::kDimensions) CHECK(evalhsc::parse_dimension(evalhsc::to_string(d)) == d);
}

TEST_CASE("canonical schema totals") {
  const auto& schema = evalhsc::canonical_schema();
  std::size_t q = 0, s = 0;
  for (const auto& c : schema) {
    q += c.question_count;
    s += c.subclass_count;
  }
  CHECK(q == 300);
  CHECK(s == 24);
  const auto report = evalhsc::validate_evalset(testing::canonical_skeleton());
  CHECK(report.pass);
  CHECK(report.total_questions == 300);
  CHECK(report.total_subclasses == 24);
}

TEST_CASE("single-item perturbations fail with precise messages") {
  const auto base = testing::canonical_skeleton();

  auto dropped = base;
  dropped.erase(dropped.begin());
  auto r = evalhsc::validate_evalset(dropped);
  CHECK_FALSE(r.pass);
  CHECK(joined(r.errors).find("Relevance: expected 50, got 49") != std::string::npos);
  CHECK(joined(r.errors).find("total: expected 300 questions, got 299") != std::string::npos);

  auto moved = base;
  moved.back().dimension = Dimension::Expertise;
  r = evalhsc::validate_evalset(moved);
  CHECK_FALSE(r.pass);
  CHECK(joined(r.errors).find("Depth: expected 25, got 24") != std::string::npos);
  CHECK(joined(r.errors).find("Expertise: expected 74, got 75") != std::string::npos);

  auto extra = base;
  extra.push_back({"extra", Dimension::Originality, "Originality/sub0", "q"});
  r = evalhsc::validate_evalset(extra);
  CHECK(joined(r.errors).find("Originality: expected 38, got 39") != std::string::npos);

  auto resubclassed = base;
  resubclassed.front().subclass = "Relevance/new";
  r = evalhsc::validate_evalset(resubclassed);
  CHECK(joined(r.errors).find("Relevance: expected 4 subclasses, got 5") != std::string::npos);

  auto dup = base;
  dup[1].id = dup[0].id;
  r = evalhsc::validate_evalset(dup);
  CHECK(r.errors == std::vector<std::string>{"duplicate item id " + base[0].id});
}

TEST_CASE("schema and evalset files") {
  const auto schema = evalhsc::load_schema(testing::fixture("pipeline/evalset_schema.json"));
  REQUIRE(schema.size() == 6);
  const auto items = evalhsc::read_evalset(testing::fixture("pipeline/evalset.jsonl"));
  CHECK(items.size() == 12);
  CHECK(evalhsc::validate_evalset(items, schema).pass);
  CHECK_FALSE(evalhsc::validate_evalset(items).pass);
  testing::TempDir tmp;
  evalhsc::write_evalset(tmp / "e.jsonl", items);
  const auto back = evalhsc::read_evalset(tmp / "e.jsonl");
  REQUIRE(back.size() == items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    CHECK(back[i].id == items[i].id);
    CHECK(back[i].dimension == items[i].dimension);
    CHECK(back[i].subclass == items[i].subclass);
    CHECK(back[i].question == items[i].question);
  }
}

TEST_CASE("high quality means strictly above 8") {
  auto report_for = [](double v) {
    evalhsc::Scores s;
    s.fill(v);
    return evalhsc::build_report("m", {{"m", "i", s}});
  };
  CHECK(report_for(8.0).composite_mean == 8.0);
  CHECK_FALSE(report_for(8.0).high_quality);
  CHECK(report_for(8.0 + 1e-9).high_quality);
  CHECK_FALSE(report_for(7.99).high_quality);
}

TEST_CASE("score cards are range checked") {
  evalhsc::ScoreCard c{"m", "i", {1, 2, 3, 4, 5, 6}};
  CHECK(evalhsc::composite(c) == doctest::Approx(3.5));
  c.scores[4] = 10.01;
  CHECK_THROWS_WITH_AS(evalhsc::validate(c), doctest::Contains("Originality"), evalhsc::EvalError);
  c.scores[4] = std::nan("");
  CHECK_THROWS_AS(evalhsc::validate(c), evalhsc::EvalError);
  c.scores[4] = -0.5;
  CHECK_THROWS_AS(evalhsc::build_report("m", {c}), evalhsc::EvalError);
}

TEST_CASE("published score table arithmetic") {
  const auto reports = testing::published_reports();
  const double expected_sums[] = {49.38, 54.93, 50.27, 55.59};
  for (std::size_t i = 0; i < reports.size(); ++i) {
    CAPTURE(reports[i].model_name);
    CHECK(std::fabs(reports[i].dimension_sum - expected_sums[i]) < 1e-9);
    CHECK(reports[i].total_discrepancy());  // reported totals are on a different scale than the sums
  }
  const auto by_total = evalhsc::rank_models(reports, RankKey::ReportedTotal);
  CHECK(by_total[0].model_name == "HSCGPT");
  CHECK(by_total[1].model_name == "Alpaca");
  CHECK(by_total[2].model_name == "ChatGLM");
  CHECK(by_total[3].model_name == "Baichuan");
  const auto by_sum = evalhsc::rank_models(reports, RankKey::DimensionSum);
  CHECK(by_sum[0].model_name == "HSCGPT");
  CHECK(by_sum[3].model_name == "Baichuan");

  const auto leaders = evalhsc::dimension_leaders(reports);
  CHECK(leaders.at(Dimension::Expertise) == "HSCGPT");
  CHECK(leaders.at(Dimension::Depth) == "HSCGPT");
  CHECK(leaders.at(Dimension::Comprehensiveness) == "Alpaca");
  CHECK(leaders.at(Dimension::Originality) == "Alpaca");
  CHECK(leaders.at(Dimension::Relevance) == "ChatGLM");
  // The table itself gives Utility to Baichuan (9.75 against ChatGLM's 9.70).
  CHECK(leaders.at(Dimension::Utility) == "Baichuan");
}

TEST_CASE("ranking ties and missing totals") {
  evalhsc::Scores s;
  s.fill(7.0);
  std::vector<evalhsc::ModelReport> rs{evalhsc::build_report("zeta", {{"zeta", "i", s}}),
                                       evalhsc::build_report("alpha", {{"alpha", "i", s}})};
  const auto ranked = evalhsc::rank_models(rs, RankKey::CompositeMean);
  CHECK(ranked[0].model_name == "alpha");
  CHECK_THROWS_WITH_AS(evalhsc::rank_models(rs, RankKey::ReportedTotal), doctest::Contains("reported_total"),
                       evalhsc::EvalError);
  CHECK(evalhsc::parse_rank_key("reported-total") == RankKey::ReportedTotal);
  CHECK_THROWS_AS(evalhsc::parse_rank_key("median"), evalhsc::EvalError);
}

TEST_CASE("judge output parsing") {
  const std::string raw =
      "Scores:\nRelevance: 8.5\nCompleteness: 7\n**Practicality**: 9.25\nprofessionalism = 11\n"
      "Originality：6.0\nDepth: -1\nNote: fine";
  const auto res = evalhsc::parse_judge_output("m", "q1", raw);
  CHECK(res.card.scores == evalhsc::Scores{8.5, 7.0, 9.25, 10.0, 6.0, 0.0});
  CHECK(res.clamp_log == std::vector<std::string>{"Expertise: 11 clamped to 10.00", "Depth: -1 clamped to 0.00"});
  CHECK(res.raw == raw);
  CHECK_THROWS_WITH_AS(evalhsc::parse_judge_output("m", "q1", "Relevance: 8\nDepth: 7"),
                       doctest::Contains("missing Comprehensiveness, Utility, Expertise, Originality"),
                       evalhsc::EvalError);
  CHECK_THROWS_WITH_AS(evalhsc::parse_judge_output("m", "q1", "nothing useful"), doctest::Contains("nothing useful"),
                       evalhsc::EvalError);
}

TEST_CASE("judging through the mock client") {
  chat::MockChatClient client;
  const evalhsc::EvalItem item{"q1", Dimension::Depth, "Depth/sub0", "How do rain gardens work?"};
  const auto rubric = synth::builtin_template("judge_rubric");
  const auto a = evalhsc::judge_scores(item, "HSCGPT", "They infiltrate runoff.", &client, rubric, 11);
  const auto b = evalhsc::judge_scores(item, "HSCGPT", "They infiltrate runoff.", &client, rubric, 11);
  CHECK(a.card.scores == b.card.scores);
  for (double v : a.card.scores) {
    CHECK(v >= 5.0);
    CHECK(v <= 10.0);
  }
  CHECK_THROWS_AS(evalhsc::judge_scores(item, "m", "r", nullptr, rubric, 1), evalhsc::EvalError);
}

TEST_CASE("scores CSV round trip") {
  const auto cards = evalhsc::read_scores_csv(testing::fixture("pipeline/published_scores.csv"));
  REQUIRE(cards.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(cards[i].model_name == testing::published_scores()[i].model);
    CHECK(cards[i].scores == testing::published_scores()[i].scores);
  }
  const auto again = evalhsc::parse_scores_csv(evalhsc::format_scores_csv(cards));
  REQUIRE(again.size() == cards.size());
  for (std::size_t i = 0; i < cards.size(); ++i) CHECK(again[i].scores == cards[i].scores);
  CHECK_THROWS_AS(evalhsc::parse_scores_csv("model,item\n"), evalhsc::EvalError);
  CHECK_THROWS_AS(evalhsc::parse_scores_csv(""), evalhsc::EvalError);
  CHECK_THROWS_WITH_AS(
      evalhsc::parse_scores_csv("model,item,relevance,comprehensiveness,utility,expertise,originality,depth\n"
                                "m,i,1,2,3,4,5,x\n"),
      doctest::Contains("line 2"), evalhsc::EvalError);

  const auto reports = evalhsc::reports_by_model(cards, {{"HSCGPT", 159.36}});
  CHECK(reports.size() == 4);
  CHECK(reports[0].model_name == "Alpaca");
  CHECK_FALSE(reports[0].reported_total);
  const auto table = evalhsc::format_table(reports);
  CHECK(table.find("159.36") != std::string::npos);
}
