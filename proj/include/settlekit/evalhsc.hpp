#pragma once

// Six-dimension evaluation harness: evaluation-set schema checks, score
// aggregation, quality threshold, model ranking and judge-output parsing.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "settlekit/chat_client.hpp"
#include "settlekit/synth.hpp"

namespace settlekit::evalhsc {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered from lowest to highest difficulty. Prose synonyms: completeness =
/// Comprehensiveness, practicality = Utility, professionalism = Expertise.
enum class Dimension { Relevance, Comprehensiveness, Utility, Expertise, Originality, Depth };

inline constexpr std::size_t kDimensionCount = 6;
inline constexpr std::array<Dimension, kDimensionCount> kDimensions{
    Dimension::Relevance, Dimension::Comprehensiveness, Dimension::Utility,
    Dimension::Expertise, Dimension::Originality,       Dimension::Depth};

std::string_view to_string(Dimension d);
/// Accepts canonical names and prose synonyms, case-insensitively.
Dimension parse_dimension(std::string_view s);

inline constexpr double kMinScore = 0.0;
inline constexpr double kMaxScore = 10.0;
/// A composite mean strictly above this marks a high-quality set.
inline constexpr double kHighQualityThreshold = 8.0;

struct EvalCategory {
  Dimension dimension = Dimension::Relevance;
  std::size_t subclass_count = 0;
  std::size_t question_count = 0;
};

/// (Relevance 4/50, Comprehensiveness 5/63, Utility 4/50, Expertise 6/74,
///  Originality 3/38, Depth 2/25): 24 subclasses, 300 questions.
const std::vector<EvalCategory>& canonical_schema();
std::vector<EvalCategory> load_schema(const std::filesystem::path& path);

struct EvalItem {
  std::string id;
  Dimension dimension = Dimension::Relevance;
  std::string subclass;
  std::string question;
};

nlohmann::ordered_json to_json(const EvalItem& item);
EvalItem item_from_json(const nlohmann::json& j);
std::vector<EvalItem> read_evalset(const std::filesystem::path& path);
void write_evalset(const std::filesystem::path& path, const std::vector<EvalItem>& items);

struct EvalsetReport {
  bool pass = false;
  std::size_t total_questions = 0;
  std::size_t total_subclasses = 0;
  std::vector<std::string> errors;

  nlohmann::ordered_json to_json() const;
};

/// Passes iff per-dimension item and distinct-subclass counts match the
/// schema and the totals match the schema totals.
EvalsetReport validate_evalset(const std::vector<EvalItem>& items,
                               const std::vector<EvalCategory>& schema = canonical_schema());

using Scores = std::array<double, kDimensionCount>;

struct ScoreCard {
  std::string model_name;
  std::string item_id;
  Scores scores{};
};

/// Throws EvalError if any score is outside [0, 10] or not finite.
void validate(const ScoreCard& card);

/// Arithmetic mean of the six scores.
double composite(const ScoreCard& card);

struct ModelReport {
  std::string model_name;
  Scores per_dimension_mean{};
  double dimension_sum = 0.0;
  double composite_mean = 0.0;
  std::optional<double> reported_total;  // imported verbatim, never derived
  bool high_quality = false;
  std::size_t card_count = 0;

  /// True when a reported total is present and differs from dimension_sum.
  bool total_discrepancy() const;
  nlohmann::ordered_json to_json() const;
};

ModelReport build_report(const std::string& model, const std::vector<ScoreCard>& cards,
                         std::optional<double> reported_total = std::nullopt);

enum class RankKey { DimensionSum, CompositeMean, ReportedTotal };
std::string_view to_string(RankKey k);
/// "dimension-sum", "composite-mean", "reported-total".
RankKey parse_rank_key(std::string_view s);

/// Descending by key, ties by model name ascending.
std::vector<ModelReport> rank_models(std::vector<ModelReport> reports, RankKey key);

/// Model with the highest mean per dimension (ties: name ascending).
std::map<Dimension, std::string> dimension_leaders(const std::vector<ModelReport>& reports);

/// Aligned plain-text table: model, six dimensions, sum, mean, reported total.
std::string format_table(const std::vector<ModelReport>& reports);

struct JudgeResult {
  ScoreCard card;
  std::vector<std::string> clamp_log;
  std::string raw;
};

/// Parses "<Dimension>: <number>" lines (synonyms accepted). Scores outside
/// [0, 10] are clamped and logged. Throws EvalError carrying the raw text
/// when any dimension is missing.
JudgeResult parse_judge_output(const std::string& model, const std::string& item_id, const std::string& raw);

/// Asks the judge client to score `response`; retries unparseable output up
/// to `max_attempts` times with successive seeds.
JudgeResult judge_scores(const EvalItem& item, const std::string& model, const std::string& response,
                         chat::ChatClient* client, const synth::PromptTemplate& rubric, std::uint64_t seed,
                         int max_attempts = 3);

/// CSV header: model,item,relevance,comprehensiveness,utility,expertise,originality,depth
std::vector<ScoreCard> read_scores_csv(const std::filesystem::path& path);
std::vector<ScoreCard> parse_scores_csv(std::string_view content);
std::string format_scores_csv(const std::vector<ScoreCard>& cards);

/// Groups cards by model (name order) and builds one report per model.
std::vector<ModelReport> reports_by_model(const std::vector<ScoreCard>& cards,
                                          const std::map<std::string, double>& reported_totals = {});

}  // namespace settlekit::evalhsc
