#pragma once

// Scenario-driven QA and dialogue synthesis over a ChatClient.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "settlekit/chat_client.hpp"
#include "settlekit/kb_types.hpp"

namespace settlekit::synth {

class SynthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PrimaryScene { ReferenceCases, DesignFrameworkSupplement, DesignPhilosophy };

enum class SecondaryScene {
  WaterfrontSpace,
  PostIndustrialSite,
  CampusDesign,
  ArchitecturalDesign,
  EcologicalDesign,
  LandscapeDesign,
  SustainableDesign,
  ChildFriendly,
  ResilientCity,
  LivingCircle,
  SpongeCity,
  SmartCity,
  PlanningAndDesign,
};

std::string_view to_string(PrimaryScene p);
std::string_view to_string(SecondaryScene s);
/// Chinese scene term used inside prompts, e.g. SpongeCity -> 海绵城市.
std::string_view chinese_name(PrimaryScene p);
std::string_view chinese_name(SecondaryScene s);
PrimaryScene parse_primary_scene(std::string_view s);
SecondaryScene parse_secondary_scene(std::string_view s);

struct Scenario {
  PrimaryScene primary = PrimaryScene::DesignPhilosophy;
  SecondaryScene secondary = SecondaryScene::SpongeCity;

  /// "Primary/Secondary", e.g. "DesignPhilosophy/SpongeCity".
  std::string key() const;
  /// Parses a key; rejects unknown names and pairs outside the taxonomy.
  static Scenario parse(std::string_view key);

  auto operator<=>(const Scenario&) const = default;
};

/// The closed scene taxonomy (14 primary/secondary pairs; architectural
/// design occurs under two primary scenes).
const std::vector<Scenario>& taxonomy();
bool in_taxonomy(const Scenario& s);

struct Role {
  std::string name;
  std::string persona_prompt;
};

/// Resident, urban planner, architectural designer, landscape architect.
const std::vector<Role>& builtin_roles();
const Role& builtin_role(std::string_view name);

struct PromptTemplate {
  std::string id;
  std::string body;
  std::set<std::string> required_slots;

  /// Builds a template whose required slots are the `{name}` markers of body.
  static PromptTemplate from_body(std::string id, std::string body);
  /// Reads `<dir>/<id>.txt` and its sidecar `<dir>/<id>.json`
  /// ({"id", "required_slots"}); throws when they disagree.
  static PromptTemplate load(const std::filesystem::path& dir, const std::string& id);
  /// Throws SynthError unless body markers and required_slots coincide.
  void validate() const;
};

/// Names of `{name}` markers in `body` (name: [A-Za-z_][A-Za-z0-9_]*).
std::set<std::string> slot_markers(std::string_view body);

/// Substitutes every marker. Missing slots throw SynthError("missing slot x");
/// extra slots are reported through `warnings` when given.
std::string render_prompt(const PromptTemplate& tmpl, const std::map<std::string, std::string>& slots,
                          std::vector<std::string>* warnings = nullptr);

/// Shipped templates: single_turn_role, design_philosophy,
/// multi_turn_discussion, proposal_section, judge_rubric.
const std::map<std::string, PromptTemplate>& builtin_templates();
const PromptTemplate& builtin_template(const std::string& id);

struct QaTurn {
  std::string role;
  std::string question;
  std::string answer;

  bool operator==(const QaTurn&) const = default;
};

struct GeneratorMeta {
  std::string template_id;
  std::string model;
  std::uint64_t seed = 0;
  double temperature = 0.0;

  bool operator==(const GeneratorMeta&) const = default;
};

struct QaRecord {
  std::string id;
  Scenario scenario;
  std::vector<QaTurn> turns;
  std::vector<std::string> grounding;
  std::vector<kb::Verdict> kg_verdicts;
  bool contradicted = false;
  GeneratorMeta generator_meta;

  bool operator==(const QaRecord&) const = default;
};

nlohmann::ordered_json to_json(const QaRecord& r);
QaRecord record_from_json(const nlohmann::json& j);
void write_records(const std::filesystem::path& path, const std::vector<QaRecord>& records);
std::vector<QaRecord> read_records(const std::filesystem::path& path);

inline constexpr std::string_view kStopMarker = "<END_OF_DISCUSSION>";
inline constexpr double kDefaultTemperature = 0.7;

struct SynthOptions {
  std::uint64_t seed = 0;
  double temperature = kDefaultTemperature;
  std::size_t max_turns_cap = 16;
  /// Post-generation cleaning hook: a record any of whose texts matches one
  /// of these patterns is dropped and counted.
  std::vector<std::regex> reject_patterns;
};

struct BatchResult {
  std::vector<QaRecord> records;
  std::size_t requested = 0;
  std::size_t dropped_empty = 0;
  std::size_t dropped_filtered = 0;
  std::size_t failed = 0;
  std::vector<std::string> errors;
};

/// `n` single-turn records. Generation runs concurrently up to the client's
/// in-flight cap; output order and content depend only on the inputs.
BatchResult generate_single_turn(const Scenario& scenario, const Role& role, const PromptTemplate& tmpl,
                                 chat::ChatClient* client, std::size_t n, const SynthOptions& options);

/// One autonomous multi-role discussion. Turn i is asked by
/// roles[i mod roles.size()]; grounding chunk texts are injected verbatim
/// into the answering system prompt. Stops at max_turns or on kStopMarker.
QaRecord generate_multi_turn(const Scenario& scenario, const std::vector<Role>& roles, const PromptTemplate& tmpl,
                             chat::ChatClient* client, std::size_t max_turns,
                             const std::vector<kb::KbChunk>& grounding, const SynthOptions& options);

struct ProposalSectionSet {
  std::string project_background;
  std::string design_objectives;
  std::string site_characteristics_and_challenges;
  std::string design_strategies;
  std::string conclusions;

  bool operator==(const ProposalSectionSet&) const = default;
};

nlohmann::ordered_json to_json(const ProposalSectionSet& p);

/// Five design-proposal sections; throws SynthError("missing: ...") naming
/// every section that came back empty.
ProposalSectionSet generate_proposal_sections(const Scenario& scenario, chat::ChatClient* client,
                                              const SynthOptions& options);

/// Per-scenario record counts for one synthesis run.
struct SynthesisManifest {
  std::map<std::string, std::size_t> single_turn;
  std::map<std::string, std::size_t> multi_turn;
  std::size_t requested = 0;
  std::size_t emitted = 0;
  std::size_t dropped_empty = 0;
  std::size_t dropped_filtered = 0;
  std::size_t failed = 0;
  std::vector<std::string> errors;

  void add(const Scenario& s, const BatchResult& batch);
  void add_multi_turn(const QaRecord& r);
  nlohmann::ordered_json to_json() const;
};

/// Production-scale record target; a configuration default only.
inline constexpr std::size_t kProductionRecordTarget = 28000;

}  // namespace settlekit::synth
