#include "settlekit/synth.hpp"

#include <omp.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include "settlekit/digest.hpp"
#include "settlekit/text.hpp"

namespace settlekit::synth {

namespace {

struct SceneNames {
  std::string_view id;
  std::string_view zh;
};

constexpr std::array<SceneNames, 3> kPrimary{{{"ReferenceCases", "参考案例"},
                                              {"DesignFrameworkSupplement", "设计框架补充"},
                                              {"DesignPhilosophy", "设计理念"}}};

constexpr std::array<SceneNames, 13> kSecondary{{{"WaterfrontSpace", "滨水空间"},
                                                 {"PostIndustrialSite", "后工业场地"},
                                                 {"CampusDesign", "校园设计"},
                                                 {"ArchitecturalDesign", "建筑设计"},
                                                 {"EcologicalDesign", "生态设计"},
                                                 {"LandscapeDesign", "景观设计"},
                                                 {"SustainableDesign", "可持续设计"},
                                                 {"ChildFriendly", "儿童友好"},
                                                 {"ResilientCity", "韧性城市"},
                                                 {"LivingCircle", "生活圈"},
                                                 {"SpongeCity", "海绵城市"},
                                                 {"SmartCity", "智慧城市"},
                                                 {"PlanningAndDesign", "规划设计"}}};

constexpr std::array<std::string_view, 4> kSites{"卡班湖沿岸", "老工业区滨河地带", "城市中心老旧社区",
                                                 "高校新校区"};

constexpr std::string_view kExpertSystem =
    "你是人居环境建设领域的资深专家顾问，熟悉城市规划、建筑设计与景观设计的标准规范。"
    "请给出准确、专业、可操作的回答。";

struct SectionSpec {
  std::string_view field;
  std::string_view zh;
};

constexpr std::array<SectionSpec, 5> kSections{{{"project_background", "项目背景"},
                                                {"design_objectives", "设计目标"},
                                                {"site_characteristics_and_challenges", "场地特征与挑战"},
                                                {"design_strategies", "设计策略"},
                                                {"conclusions", "结论"}}};

bool slot_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool slot_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Calls f(begin, end, name) for each {name} marker.
template <typename F>
void scan_markers(std::string_view body, F&& f) {
  std::size_t i = 0;
  while ((i = body.find('{', i)) != std::string_view::npos) {
    std::size_t j = i + 1;
    if (j < body.size() && slot_start(body[j])) {
      while (j < body.size() && slot_char(body[j])) ++j;
      if (j < body.size() && body[j] == '}') {
        f(i, j + 1, body.substr(i + 1, j - i - 1));
        i = j + 1;
        continue;
      }
    }
    ++i;
  }
}

std::map<std::string, std::string> scene_slots(const Scenario& s, const Role& role) {
  return {{"scene", std::string(to_string(s.secondary))},
          {"scene_zh", std::string(chinese_name(s.secondary))},
          {"primary", std::string(to_string(s.primary))},
          {"primary_zh", std::string(chinese_name(s.primary))},
          {"role", role.name}};
}

std::string record_id(std::string_view kind, const std::string& tmpl, const Scenario& s,
                      const std::vector<std::string>& roles, std::uint64_t seed, std::size_t index,
                      const std::vector<std::string>& grounding) {
  Sha256 h;
  h.update(kind).update("|").update(tmpl).update("|").update(s.key()).update("|");
  for (const auto& r : roles) h.update(r).update(",");
  h.update("|").update(std::to_string(seed)).update("|").update(std::to_string(index)).update("|");
  for (const auto& g : grounding) h.update(g).update(",");
  return "qa-" + h.hex_digest().substr(0, 16);
}

bool rejected_by_filters(const QaRecord& r, const std::vector<std::regex>& patterns) {
  for (const auto& t : r.turns) {
    for (const auto& p : patterns) {
      if (std::regex_search(t.question, p) || std::regex_search(t.answer, p)) return true;
    }
  }
  return false;
}

void require_client(const chat::ChatClient* client) {
  if (client == nullptr) throw SynthError("no client configured");
}

nlohmann::ordered_json triple_json(const kb::Triple& t) {
  nlohmann::ordered_json j;
  j["subject"] = t.subject;
  j["predicate"] = t.predicate;
  j["object"] = t.object;
  return j;
}

kb::Triple triple_from(const nlohmann::json& j) {
  return kb::Triple{j.at("subject").get<std::string>(), j.at("predicate").get<std::string>(),
                    j.at("object").get<std::string>()};
}

}  // namespace

std::string_view to_string(PrimaryScene p) { return kPrimary[static_cast<std::size_t>(p)].id; }
std::string_view to_string(SecondaryScene s) { return kSecondary[static_cast<std::size_t>(s)].id; }
std::string_view chinese_name(PrimaryScene p) { return kPrimary[static_cast<std::size_t>(p)].zh; }
std::string_view chinese_name(SecondaryScene s) { return kSecondary[static_cast<std::size_t>(s)].zh; }

PrimaryScene parse_primary_scene(std::string_view s) {
  for (std::size_t i = 0; i < kPrimary.size(); ++i) {
    if (kPrimary[i].id == s) return static_cast<PrimaryScene>(i);
  }
  throw SynthError("unknown primary scene: " + std::string(s));
}

SecondaryScene parse_secondary_scene(std::string_view s) {
  for (std::size_t i = 0; i < kSecondary.size(); ++i) {
    if (kSecondary[i].id == s) return static_cast<SecondaryScene>(i);
  }
  throw SynthError("unknown secondary scene: " + std::string(s));
}

std::string Scenario::key() const { return std::string(to_string(primary)) + "/" + std::string(to_string(secondary)); }

Scenario Scenario::parse(std::string_view key) {
  const std::size_t slash = key.find('/');
  if (slash == std::string_view::npos) throw SynthError("scenario must be Primary/Secondary: " + std::string(key));
  Scenario s{parse_primary_scene(key.substr(0, slash)), parse_secondary_scene(key.substr(slash + 1))};
  if (!in_taxonomy(s)) throw SynthError("scenario outside the scene taxonomy: " + std::string(key));
  return s;
}

const std::vector<Scenario>& taxonomy() {
  using P = PrimaryScene;
  using S = SecondaryScene;
  static const std::vector<Scenario> kTaxonomy{
      {P::ReferenceCases, S::WaterfrontSpace},
      {P::ReferenceCases, S::PostIndustrialSite},
      {P::ReferenceCases, S::CampusDesign},
      {P::ReferenceCases, S::ArchitecturalDesign},
      {P::DesignFrameworkSupplement, S::EcologicalDesign},
      {P::DesignFrameworkSupplement, S::SustainableDesign},
      {P::DesignFrameworkSupplement, S::ArchitecturalDesign},
      {P::DesignFrameworkSupplement, S::LandscapeDesign},
      {P::DesignFrameworkSupplement, S::PlanningAndDesign},
      {P::DesignPhilosophy, S::ChildFriendly},
      {P::DesignPhilosophy, S::ResilientCity},
      {P::DesignPhilosophy, S::LivingCircle},
      {P::DesignPhilosophy, S::SpongeCity},
      {P::DesignPhilosophy, S::SmartCity},
  };
  return kTaxonomy;
}

bool in_taxonomy(const Scenario& s) {
  const auto& t = taxonomy();
  return std::find(t.begin(), t.end(), s) != t.end();
}

const std::vector<Role>& builtin_roles() {
  static const std::vector<Role> kRoles{
      {"resident", "你是一位长期生活在城市社区的居民，关心日常出行、公共空间和居住环境品质。"},
      {"urban planner", "你是一位城市规划师，熟悉国土空间规划、用地布局与规划标准。"},
      {"architectural designer", "你是一位建筑设计师，关注建筑功能、空间组织与绿色建筑技术。"},
      {"landscape architect", "你是一位景观设计师，擅长生态修复、雨洪管理与公共景观营造。"},
  };
  return kRoles;
}

const Role& builtin_role(std::string_view name) {
  for (const auto& r : builtin_roles()) {
    if (r.name == name) return r;
  }
  throw SynthError("unknown role: " + std::string(name));
}

std::set<std::string> slot_markers(std::string_view body) {
  std::set<std::string> out;
  scan_markers(body, [&](std::size_t, std::size_t, std::string_view name) { out.emplace(name); });
  return out;
}

PromptTemplate PromptTemplate::from_body(std::string id, std::string body) {
  PromptTemplate t{std::move(id), std::move(body), {}};
  t.required_slots = slot_markers(t.body);
  return t;
}

void PromptTemplate::validate() const {
  if (slot_markers(body) != required_slots) {
    throw SynthError("template " + id + ": required_slots do not match the body's {slot} markers");
  }
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& dir, const std::string& id) {
  std::ifstream body_in(dir / (id + ".txt"), std::ios::binary);
  if (!body_in) throw SynthError("cannot read template " + (dir / (id + ".txt")).string());
  std::ostringstream body;
  body << body_in.rdbuf();
  std::ifstream meta_in(dir / (id + ".json"), std::ios::binary);
  if (!meta_in) throw SynthError("cannot read template manifest " + (dir / (id + ".json")).string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_in);
  } catch (const nlohmann::json::exception& e) {
    throw SynthError("template manifest " + id + ": " + e.what());
  }
  PromptTemplate t;
  t.id = meta.at("id").get<std::string>();
  if (t.id != id) throw SynthError("template manifest id " + t.id + " does not match file name " + id);
  t.body = body.str();
  for (const auto& s : meta.at("required_slots")) t.required_slots.insert(s.get<std::string>());
  t.validate();
  return t;
}

std::string render_prompt(const PromptTemplate& tmpl, const std::map<std::string, std::string>& slots,
                          std::vector<std::string>* warnings) {
  for (const auto& name : tmpl.required_slots) {
    if (!slots.count(name)) throw SynthError("missing slot " + name);
  }
  if (warnings != nullptr) {
    for (const auto& [name, value] : slots) {
      if (!tmpl.required_slots.count(name)) warnings->push_back("template " + tmpl.id + ": extra slot " + name);
    }
  }
  std::string out;
  out.reserve(tmpl.body.size());
  std::size_t copied = 0;
  scan_markers(tmpl.body, [&](std::size_t b, std::size_t e, std::string_view name) {
    out.append(tmpl.body, copied, b - copied);
    const auto it = slots.find(std::string(name));
    if (it == slots.end()) throw SynthError("missing slot " + std::string(name));
    out += it->second;
    copied = e;
  });
  out.append(tmpl.body, copied, std::string::npos);
  return out;
}

const std::map<std::string, PromptTemplate>& builtin_templates() {
  static const std::map<std::string, PromptTemplate> kTemplates = [] {
    std::map<std::string, PromptTemplate> m;
    auto add = [&](std::string id, std::string body) {
      auto t = PromptTemplate::from_body(id, std::move(body));
      m.emplace(std::move(id), std::move(t));
    };
    add("single_turn_role",
        "场景：{primary_zh}／{scene_zh}。请以{role}的身份，围绕{scene_zh}提出一个具体的专业问题。");
    add("design_philosophy", "什么是{scene_zh}的理念和原则？请从{role}的视角说明它在人居环境建设中的意义。");
    add("multi_turn_discussion", "第{turn}轮讨论，主题：{scene_zh}。你是{role}。{goal}");
    add("proposal_section", "请为{scene_zh}主题的设计项目撰写设计方案中的“{section}”部分。");
    add("judge_rubric",
        "评测问题：{question}\n模型回答：{response}\n"
        "Score the answer on Relevance, Comprehensiveness, Utility, Expertise, Originality and Depth, "
        "each on a 0-10 scale.");
    return m;
  }();
  return kTemplates;
}

const PromptTemplate& builtin_template(const std::string& id) {
  const auto& m = builtin_templates();
  const auto it = m.find(id);
  if (it == m.end()) throw SynthError("unknown template: " + id);
  return it->second;
}

nlohmann::ordered_json to_json(const QaRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["scenario"] = r.scenario.key();
  auto turns = nlohmann::ordered_json::array();
  for (const auto& t : r.turns) {
    nlohmann::ordered_json tj;
    tj["role"] = t.role;
    tj["question"] = t.question;
    tj["answer"] = t.answer;
    turns.push_back(std::move(tj));
  }
  j["turns"] = std::move(turns);
  j["grounding"] = r.grounding;
  auto verdicts = nlohmann::ordered_json::array();
  for (const auto& v : r.kg_verdicts) {
    nlohmann::ordered_json vj;
    vj["claim"] = triple_json(v.claim);
    vj["status"] = kb::to_string(v.status);
    vj["witness"] = v.witness ? triple_json(*v.witness) : nlohmann::ordered_json(nullptr);
    verdicts.push_back(std::move(vj));
  }
  j["kg_verdicts"] = std::move(verdicts);
  j["contradicted"] = r.contradicted;
  nlohmann::ordered_json meta;
  meta["template_id"] = r.generator_meta.template_id;
  meta["model"] = r.generator_meta.model;
  meta["seed"] = r.generator_meta.seed;
  meta["temperature"] = r.generator_meta.temperature;
  j["generator_meta"] = std::move(meta);
  return j;
}

QaRecord record_from_json(const nlohmann::json& j) {
  QaRecord r;
  r.id = j.at("id").get<std::string>();
  r.scenario = Scenario::parse(j.at("scenario").get<std::string>());
  for (const auto& t : j.at("turns")) {
    r.turns.push_back(QaTurn{t.at("role").get<std::string>(), t.at("question").get<std::string>(),
                             t.at("answer").get<std::string>()});
  }
  if (r.turns.empty()) throw SynthError("record " + r.id + " has no turns");
  r.grounding = j.at("grounding").get<std::vector<std::string>>();
  for (const auto& v : j.at("kg_verdicts")) {
    kb::Verdict verdict;
    verdict.claim = triple_from(v.at("claim"));
    verdict.status = kb::parse_verdict_status(v.at("status").get<std::string>());
    if (!v.at("witness").is_null()) verdict.witness = triple_from(v.at("witness"));
    r.kg_verdicts.push_back(std::move(verdict));
  }
  r.contradicted = j.value("contradicted", false);
  const auto& meta = j.at("generator_meta");
  r.generator_meta = GeneratorMeta{meta.at("template_id").get<std::string>(), meta.at("model").get<std::string>(),
                                   meta.at("seed").get<std::uint64_t>(), meta.at("temperature").get<double>()};
  return r;
}

void write_records(const std::filesystem::path& path, const std::vector<QaRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SynthError("cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

std::vector<QaRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SynthError("cannot read " + path.string());
  std::vector<QaRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw SynthError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

BatchResult generate_single_turn(const Scenario& scenario, const Role& role, const PromptTemplate& tmpl,
                                 chat::ChatClient* client, std::size_t n, const SynthOptions& options) {
  require_client(client);
  if (n == 0) throw SynthError("generate_single_turn: n must be at least 1");
  if (role.persona_prompt.empty()) throw SynthError("role " + role.name + " has an empty persona prompt");
  const std::string prompt = render_prompt(tmpl, scene_slots(scenario, role));

  enum class Outcome { Ok, Empty, Filtered, Failed };
  std::vector<QaRecord> slots(n);
  std::vector<Outcome> outcome(n, Outcome::Ok);
  std::vector<std::string> error(n);

  const int threads = static_cast<int>(std::min<std::size_t>(n, client->limits().max_in_flight));
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for num_threads(threads) schedule(dynamic, 1)
  for (std::int64_t k = 0; k < count; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const std::uint64_t seed = options.seed + i;
    try {
      const std::string question =
          text::trim(client->send(role.persona_prompt, {{"user", prompt}}, options.temperature, seed));
      const std::string answer = question.empty()
                                     ? std::string()
                                     : text::trim(client->send(std::string(kExpertSystem), {{"user", question}},
                                                               options.temperature, seed));
      if (answer.empty()) {
        outcome[i] = Outcome::Empty;
        continue;
      }
      QaRecord& r = slots[i];
      r.id = record_id("single", tmpl.id, scenario, {role.name}, options.seed, i, {});
      r.scenario = scenario;
      r.turns.push_back(QaTurn{role.name, question, answer});
      r.generator_meta = GeneratorMeta{tmpl.id, client->model_name(), seed, options.temperature};
      if (rejected_by_filters(r, options.reject_patterns)) outcome[i] = Outcome::Filtered;
    } catch (const std::exception& e) {
      outcome[i] = Outcome::Failed;
      error[i] = "record " + std::to_string(i) + ": " + e.what();
    }
  }

  BatchResult result;
  result.requested = n;
  for (std::size_t i = 0; i < n; ++i) {
    switch (outcome[i]) {
      case Outcome::Ok: result.records.push_back(std::move(slots[i])); break;
      case Outcome::Empty: ++result.dropped_empty; break;
      case Outcome::Filtered: ++result.dropped_filtered; break;
      case Outcome::Failed:
        ++result.failed;
        result.errors.push_back(std::move(error[i]));
        break;
    }
  }
  return result;
}

QaRecord generate_multi_turn(const Scenario& scenario, const std::vector<Role>& roles, const PromptTemplate& tmpl,
                             chat::ChatClient* client, std::size_t max_turns,
                             const std::vector<kb::KbChunk>& grounding, const SynthOptions& options) {
  require_client(client);
  if (roles.size() < 2) throw SynthError("multi-turn discussion needs at least two roles");
  if (max_turns < 2 || max_turns > options.max_turns_cap) {
    throw SynthError("max_turns must lie in [2, " + std::to_string(options.max_turns_cap) + "], got " +
                     std::to_string(max_turns));
  }
  for (const auto& r : roles) {
    if (r.persona_prompt.empty()) throw SynthError("role " + r.name + " has an empty persona prompt");
  }

  std::string system(kExpertSystem);
  if (!grounding.empty()) {
    system += "\n请依据以下参考资料回答：\n";
    for (const auto& c : grounding) system += "[" + c.id + "] " + c.text + "\n";
  }
  system += "当讨论已经充分时，请在回答末尾输出 " + std::string(kStopMarker) + "。";

  const std::string site(kSites[options.seed % kSites.size()]);
  const std::string scene_zh(chinese_name(scenario.secondary));

  QaRecord rec;
  rec.scenario = scenario;
  std::vector<std::string> role_names;
  for (const auto& r : roles) role_names.push_back(r.name);
  for (const auto& c : grounding) rec.grounding.push_back(c.id);
  rec.id = record_id("multi", tmpl.id, scenario, role_names, options.seed, 0, rec.grounding);
  rec.generator_meta = GeneratorMeta{tmpl.id, client->model_name(), options.seed, options.temperature};

  std::vector<chat::Message> history;
  for (std::size_t t = 0; t < max_turns; ++t) {
    const Role& role = roles[t % roles.size()];
    const std::uint64_t seed = options.seed + t;
    auto slots = scene_slots(scenario, role);
    slots["turn"] = std::to_string(t + 1);
    slots["site"] = site;
    slots["goal"] = t == 0 ? "请提问：什么是" + scene_zh + "的理念和原则？"
                           : "请结合具体场地提问：我想在" + site + "设计一系列设施，请你帮我分析如何将" + scene_zh +
                                 "理念融入我的设计中。";
    std::vector<chat::Message> ask = history;
    ask.push_back({"user", render_prompt(tmpl, slots)});
    std::string question = text::trim(client->send(role.persona_prompt, ask, options.temperature, seed));
    if (question.empty() || question.find(kStopMarker) != std::string::npos) break;

    std::vector<chat::Message> conv = history;
    conv.push_back({"user", question});
    std::string answer = client->send(system, conv, options.temperature, seed);
    const std::size_t stop = answer.find(kStopMarker);
    const bool stopping = stop != std::string::npos;
    if (stopping) answer.erase(stop);
    answer = text::trim(answer);
    if (answer.empty()) break;

    rec.turns.push_back(QaTurn{role.name, question, answer});
    history.push_back({"user", question});
    history.push_back({"assistant", answer});
    if (stopping) break;
  }
  if (rec.turns.empty()) throw SynthError("multi-turn discussion produced no turns");
  return rec;
}

nlohmann::ordered_json to_json(const ProposalSectionSet& p) {
  nlohmann::ordered_json j;
  j["project_background"] = p.project_background;
  j["design_objectives"] = p.design_objectives;
  j["site_characteristics_and_challenges"] = p.site_characteristics_and_challenges;
  j["design_strategies"] = p.design_strategies;
  j["conclusions"] = p.conclusions;
  return j;
}

ProposalSectionSet generate_proposal_sections(const Scenario& scenario, chat::ChatClient* client,
                                              const SynthOptions& options) {
  require_client(client);
  const PromptTemplate& tmpl = builtin_template("proposal_section");
  ProposalSectionSet out;
  std::array<std::string*, 5> fields{&out.project_background, &out.design_objectives,
                                     &out.site_characteristics_and_challenges, &out.design_strategies,
                                     &out.conclusions};
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < kSections.size(); ++i) {
    const std::string prompt = render_prompt(
        tmpl, {{"scene_zh", std::string(chinese_name(scenario.secondary))}, {"section", std::string(kSections[i].zh)}});
    *fields[i] = text::trim(
        client->send(std::string(kExpertSystem), {{"user", prompt}}, options.temperature, options.seed + i));
    if (fields[i]->empty()) missing.emplace_back(kSections[i].field);
  }
  if (!missing.empty()) {
    std::string msg = "missing: ";
    for (std::size_t i = 0; i < missing.size(); ++i) msg += (i ? ", " : "") + missing[i];
    throw SynthError(msg);
  }
  return out;
}

void SynthesisManifest::add(const Scenario& s, const BatchResult& batch) {
  single_turn[s.key()] += batch.records.size();
  requested += batch.requested;
  emitted += batch.records.size();
  dropped_empty += batch.dropped_empty;
  dropped_filtered += batch.dropped_filtered;
  failed += batch.failed;
  errors.insert(errors.end(), batch.errors.begin(), batch.errors.end());
}

void SynthesisManifest::add_multi_turn(const QaRecord& r) {
  multi_turn[r.scenario.key()] += 1;
  requested += 1;
  emitted += 1;
}

nlohmann::ordered_json SynthesisManifest::to_json() const {
  nlohmann::ordered_json j;
  j["requested"] = requested;
  j["emitted"] = emitted;
  j["dropped_empty"] = dropped_empty;
  j["dropped_filtered"] = dropped_filtered;
  j["failed"] = failed;
  nlohmann::ordered_json st(nlohmann::ordered_json::object());
  for (const auto& [k, v] : single_turn) st[k] = v;
  nlohmann::ordered_json mt(nlohmann::ordered_json::object());
  for (const auto& [k, v] : multi_turn) mt[k] = v;
  j["single_turn"] = std::move(st);
  j["multi_turn"] = std::move(mt);
  j["errors"] = errors;
  return j;
}

}  // namespace settlekit::synth
