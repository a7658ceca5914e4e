#include "settlekit/evalhsc.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "settlekit/text.hpp"

namespace settlekit::evalhsc {

namespace {

constexpr std::array<std::string_view, kDimensionCount> kNames{"Relevance", "Comprehensiveness", "Utility",
                                                               "Expertise", "Originality",       "Depth"};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::size_t idx(Dimension d) { return static_cast<std::size_t>(d); }

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  return out + "\"";
}

}  // namespace

std::string_view to_string(Dimension d) { return kNames[idx(d)]; }

Dimension parse_dimension(std::string_view s) {
  const std::string l = lower(text::trim(s));
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (lower(kNames[i]) == l) return static_cast<Dimension>(i);
  }
  if (l == "completeness") return Dimension::Comprehensiveness;
  if (l == "practicality") return Dimension::Utility;
  if (l == "professionalism") return Dimension::Expertise;
  throw EvalError("unknown dimension: " + std::string(s));
}

const std::vector<EvalCategory>& canonical_schema() {
  static const std::vector<EvalCategory> kSchema{
      {Dimension::Relevance, 4, 50},   {Dimension::Comprehensiveness, 5, 63}, {Dimension::Utility, 4, 50},
      {Dimension::Expertise, 6, 74},   {Dimension::Originality, 3, 38},       {Dimension::Depth, 2, 25},
  };
  return kSchema;
}

std::vector<EvalCategory> load_schema(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EvalError("cannot read schema " + path.string());
  std::vector<EvalCategory> schema;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& e : j) {
      schema.push_back(EvalCategory{parse_dimension(e.at("dimension").get<std::string>()),
                                    e.at("subclass_count").get<std::size_t>(),
                                    e.at("question_count").get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw EvalError(path.string() + ": " + e.what());
  }
  return schema;
}

nlohmann::ordered_json to_json(const EvalItem& item) {
  nlohmann::ordered_json j;
  j["id"] = item.id;
  j["dimension"] = to_string(item.dimension);
  j["subclass"] = item.subclass;
  j["question"] = item.question;
  return j;
}

EvalItem item_from_json(const nlohmann::json& j) {
  return EvalItem{j.at("id").get<std::string>(), parse_dimension(j.at("dimension").get<std::string>()),
                  j.at("subclass").get<std::string>(), j.at("question").get<std::string>()};
}

std::vector<EvalItem> read_evalset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EvalError("cannot read eval set " + path.string());
  std::vector<EvalItem> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      items.push_back(item_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw EvalError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return items;
}

void write_evalset(const std::filesystem::path& path, const std::vector<EvalItem>& items) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw EvalError("cannot write " + path.string());
  for (const auto& i : items) out << to_json(i).dump() << '\n';
}

nlohmann::ordered_json EvalsetReport::to_json() const {
  nlohmann::ordered_json j;
  j["pass"] = pass;
  j["total_questions"] = total_questions;
  j["total_subclasses"] = total_subclasses;
  j["errors"] = errors;
  return j;
}

EvalsetReport validate_evalset(const std::vector<EvalItem>& items, const std::vector<EvalCategory>& schema) {
  std::array<std::size_t, kDimensionCount> questions{};
  std::array<std::set<std::string>, kDimensionCount> subclasses;
  std::set<std::string> ids;
  EvalsetReport report;
  for (const auto& item : items) {
    ++questions[idx(item.dimension)];
    subclasses[idx(item.dimension)].insert(item.subclass);
    if (!ids.insert(item.id).second) report.errors.push_back("duplicate item id " + item.id);
  }
  std::size_t expected_q = 0;
  std::size_t expected_s = 0;
  std::array<bool, kDimensionCount> in_schema{};
  for (const auto& cat : schema) {
    const std::size_t d = idx(cat.dimension);
    in_schema[d] = true;
    expected_q += cat.question_count;
    expected_s += cat.subclass_count;
    if (questions[d] != cat.question_count) {
      report.errors.push_back(std::string(to_string(cat.dimension)) + ": expected " +
                              std::to_string(cat.question_count) + ", got " + std::to_string(questions[d]));
    }
    if (subclasses[d].size() != cat.subclass_count) {
      report.errors.push_back(std::string(to_string(cat.dimension)) + ": expected " +
                              std::to_string(cat.subclass_count) + " subclasses, got " +
                              std::to_string(subclasses[d].size()));
    }
  }
  for (std::size_t d = 0; d < kDimensionCount; ++d) {
    report.total_questions += questions[d];
    report.total_subclasses += subclasses[d].size();
    if (!in_schema[d] && questions[d] > 0) {
      report.errors.push_back(std::string(kNames[d]) + ": dimension not in schema, got " +
                              std::to_string(questions[d]));
    }
  }
  if (report.total_questions != expected_q) {
    report.errors.push_back("total: expected " + std::to_string(expected_q) + " questions, got " +
                            std::to_string(report.total_questions));
  }
  if (report.total_subclasses != expected_s) {
    report.errors.push_back("total: expected " + std::to_string(expected_s) + " subclasses, got " +
                            std::to_string(report.total_subclasses));
  }
  report.pass = report.errors.empty();
  return report;
}

void validate(const ScoreCard& card) {
  for (std::size_t d = 0; d < kDimensionCount; ++d) {
    const double s = card.scores[d];
    if (!std::isfinite(s) || s < kMinScore || s > kMaxScore) {
      throw EvalError("score card " + card.model_name + "/" + card.item_id + ": " + std::string(kNames[d]) +
                      " score " + std::to_string(s) + " outside [0, 10]");
    }
  }
}

double composite(const ScoreCard& card) {
  validate(card);
  double sum = 0.0;
  for (double s : card.scores) sum += s;
  return sum / static_cast<double>(kDimensionCount);
}

bool ModelReport::total_discrepancy() const {
  return reported_total && std::fabs(*reported_total - dimension_sum) > 1e-6;
}

nlohmann::ordered_json ModelReport::to_json() const {
  nlohmann::ordered_json j;
  j["model_name"] = model_name;
  nlohmann::ordered_json means;
  for (std::size_t d = 0; d < kDimensionCount; ++d) means[std::string(kNames[d])] = per_dimension_mean[d];
  j["per_dimension_mean"] = std::move(means);
  j["dimension_sum"] = dimension_sum;
  j["composite_mean"] = composite_mean;
  j["reported_total"] = reported_total ? nlohmann::ordered_json(*reported_total) : nlohmann::ordered_json(nullptr);
  j["total_discrepancy"] = total_discrepancy();
  j["high_quality"] = high_quality;
  j["card_count"] = card_count;
  return j;
}

ModelReport build_report(const std::string& model, const std::vector<ScoreCard>& cards,
                         std::optional<double> reported_total) {
  if (cards.empty()) throw EvalError("build_report: no score cards for " + model);
  ModelReport r;
  r.model_name = model;
  r.card_count = cards.size();
  for (const auto& c : cards) {
    if (c.model_name != model) {
      throw EvalError("build_report: card for " + c.model_name + " passed for model " + model);
    }
    validate(c);
    for (std::size_t d = 0; d < kDimensionCount; ++d) r.per_dimension_mean[d] += c.scores[d];
  }
  for (auto& m : r.per_dimension_mean) m /= static_cast<double>(cards.size());
  for (double m : r.per_dimension_mean) r.dimension_sum += m;
  r.composite_mean = r.dimension_sum / static_cast<double>(kDimensionCount);
  r.high_quality = r.composite_mean > kHighQualityThreshold;
  r.reported_total = reported_total;
  return r;
}

std::string_view to_string(RankKey k) {
  switch (k) {
    case RankKey::DimensionSum: return "dimension-sum";
    case RankKey::CompositeMean: return "composite-mean";
    case RankKey::ReportedTotal: return "reported-total";
  }
  return "dimension-sum";
}

RankKey parse_rank_key(std::string_view s) {
  const std::string l = lower(s);
  if (l == "dimension-sum" || l == "dimension_sum") return RankKey::DimensionSum;
  if (l == "composite-mean" || l == "composite_mean") return RankKey::CompositeMean;
  if (l == "reported-total" || l == "reported_total") return RankKey::ReportedTotal;
  throw EvalError("unknown ranking key: " + std::string(s));
}

std::vector<ModelReport> rank_models(std::vector<ModelReport> reports, RankKey key) {
  if (reports.empty()) throw EvalError("rank_models: no reports");
  if (key == RankKey::ReportedTotal) {
    for (const auto& r : reports) {
      if (!r.reported_total) throw EvalError("rank_models: " + r.model_name + " has no reported_total");
    }
  }
  auto value = [key](const ModelReport& r) {
    switch (key) {
      case RankKey::DimensionSum: return r.dimension_sum;
      case RankKey::CompositeMean: return r.composite_mean;
      case RankKey::ReportedTotal: return *r.reported_total;
    }
    return r.dimension_sum;
  };
  std::sort(reports.begin(), reports.end(), [&](const ModelReport& a, const ModelReport& b) {
    const double va = value(a);
    const double vb = value(b);
    return va != vb ? va > vb : a.model_name < b.model_name;
  });
  return reports;
}

std::map<Dimension, std::string> dimension_leaders(const std::vector<ModelReport>& reports) {
  std::map<Dimension, std::string> out;
  for (Dimension d : kDimensions) {
    const ModelReport* best = nullptr;
    for (const auto& r : reports) {
      const double v = r.per_dimension_mean[idx(d)];
      if (best == nullptr || v > best->per_dimension_mean[idx(d)] ||
          (v == best->per_dimension_mean[idx(d)] && r.model_name < best->model_name)) {
        best = &r;
      }
    }
    if (best != nullptr) out[d] = best->model_name;
  }
  return out;
}

std::string format_table(const std::vector<ModelReport>& reports) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"Model"});
  for (auto n : kNames) rows.back().emplace_back(n);
  rows.back().insert(rows.back().end(), {"SUM", "MEAN", "TOTAL"});
  for (const auto& r : reports) {
    std::vector<std::string> row{r.model_name};
    for (double m : r.per_dimension_mean) row.push_back(fmt2(m));
    row.push_back(fmt2(r.dimension_sum));
    row.push_back(fmt2(r.composite_mean));
    row.push_back(r.reported_total ? fmt2(*r.reported_total) : "-");
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], text::codepoint_count(row[c]));
  }
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::size_t pad = width[c] - text::codepoint_count(row[c]);
      if (c == 0) {
        out += row[c] + std::string(pad, ' ');
      } else {
        out += "  " + std::string(pad, ' ') + row[c];
      }
    }
    out += '\n';
  }
  return out;
}

JudgeResult parse_judge_output(const std::string& model, const std::string& item_id, const std::string& raw) {
  static const std::regex kLine(R"(^\s*\**\s*([A-Za-z]+)\s*\**\s*(?:[:=]|：)\s*(-?[0-9]+(?:\.[0-9]+)?))");
  JudgeResult result;
  result.raw = raw;
  result.card.model_name = model;
  result.card.item_id = item_id;
  std::array<bool, kDimensionCount> seen{};
  std::istringstream in(raw);
  std::string line;
  while (std::getline(in, line)) {
    std::smatch m;
    if (!std::regex_search(line, m, kLine)) continue;
    Dimension d;
    try {
      d = parse_dimension(m[1].str());
    } catch (const EvalError&) {
      continue;
    }
    double v = std::stod(m[2].str());
    if (v < kMinScore || v > kMaxScore) {
      const double clamped = std::clamp(v, kMinScore, kMaxScore);
      result.clamp_log.push_back(std::string(to_string(d)) + ": " + m[2].str() + " clamped to " + fmt2(clamped));
      v = clamped;
    }
    result.card.scores[idx(d)] = v;
    seen[idx(d)] = true;
  }
  std::string missing;
  for (std::size_t d = 0; d < kDimensionCount; ++d) {
    if (!seen[d]) missing += (missing.empty() ? "" : ", ") + std::string(kNames[d]);
  }
  if (!missing.empty()) {
    throw EvalError("judge output missing " + missing + "; raw output:\n" + raw);
  }
  return result;
}

JudgeResult judge_scores(const EvalItem& item, const std::string& model, const std::string& response,
                         chat::ChatClient* client, const synth::PromptTemplate& rubric, std::uint64_t seed,
                         int max_attempts) {
  if (client == nullptr) throw EvalError("no client configured");
  const std::string prompt = synth::render_prompt(rubric, {{"question", item.question}, {"response", response}});
  const std::string system =
      "You are a strict evaluator for human-settlement planning answers. Reply with exactly six lines, one per "
      "dimension, formatted as '<Dimension>: <score>' with scores between 0 and 10. " +
      std::string(chat::kScoreFormatMarker);
  std::string last_error;
  for (int attempt = 0; attempt < std::max(1, max_attempts); ++attempt) {
    const std::string raw =
        client->send(system, {{"user", prompt}}, 0.0, seed + static_cast<std::uint64_t>(attempt));
    try {
      return parse_judge_output(model, item.id, raw);
    } catch (const EvalError& e) {
      last_error = e.what();
    }
  }
  throw EvalError("unparseable judge output for item " + item.id + ": " + last_error);
}

std::vector<ScoreCard> parse_scores_csv(std::string_view content) {
  std::istringstream in{std::string(content)};
  std::string line;
  std::vector<ScoreCard> cards;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (!header_seen) {
      static const std::vector<std::string> kHeader{"model",     "item",        "relevance", "comprehensiveness",
                                                    "utility",   "expertise",   "originality", "depth"};
      std::vector<std::string> got;
      for (const auto& f : fields) got.push_back(lower(text::trim(f)));
      if (got != kHeader) {
        throw EvalError("scores CSV header must be model,item,relevance,comprehensiveness,utility,expertise,"
                        "originality,depth");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 2 + kDimensionCount) {
      throw EvalError("scores CSV line " + std::to_string(lineno) + ": expected 8 fields, got " +
                      std::to_string(fields.size()));
    }
    ScoreCard c;
    c.model_name = text::trim(fields[0]);
    c.item_id = text::trim(fields[1]);
    for (std::size_t d = 0; d < kDimensionCount; ++d) {
      try {
        std::size_t used = 0;
        const std::string f = text::trim(fields[2 + d]);
        c.scores[d] = std::stod(f, &used);
        if (used != f.size()) throw std::invalid_argument(f);
      } catch (const std::exception&) {
        throw EvalError("scores CSV line " + std::to_string(lineno) + ": bad " + std::string(kNames[d]) +
                        " score '" + fields[2 + d] + "'");
      }
    }
    validate(c);
    cards.push_back(std::move(c));
  }
  if (!header_seen) throw EvalError("scores CSV is empty");
  return cards;
}

std::vector<ScoreCard> read_scores_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EvalError("cannot read scores " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scores_csv(buf.str());
}

std::string format_scores_csv(const std::vector<ScoreCard>& cards) {
  std::string out = "model,item,relevance,comprehensiveness,utility,expertise,originality,depth\n";
  for (const auto& c : cards) {
    out += csv_field(c.model_name) + "," + csv_field(c.item_id);
    for (double s : c.scores) {
      char buf[32];
      std::snprintf(buf, sizeof buf, ",%.17g", s);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::vector<ModelReport> reports_by_model(const std::vector<ScoreCard>& cards,
                                          const std::map<std::string, double>& reported_totals) {
  std::map<std::string, std::vector<ScoreCard>> by_model;
  for (const auto& c : cards) by_model[c.model_name].push_back(c);
  std::vector<ModelReport> out;
  for (const auto& [model, group] : by_model) {
    const auto it = reported_totals.find(model);
    out.push_back(build_report(model, group,
                               it == reported_totals.end() ? std::nullopt : std::optional<double>(it->second)));
  }
  return out;
}

}  // namespace settlekit::evalhsc
