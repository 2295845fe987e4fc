#include "dkg/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "dkg/error.hpp"
#include "dkg/rng.hpp"

namespace dkg {

using nlohmann::json;

namespace {

const std::set<std::string> kReasoningTypes = {"inform", "selection",
                                               "true_false", "extraction"};

std::string where(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line) + ": ";
}

std::vector<std::string> string_list(const json& j, const char* field,
                                     const std::string& at) {
  if (!j.is_array()) throw data_error(at + "field '" + field + "' must be a list");
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string())
      throw data_error(at + "field '" + field + "' must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::string string_field(const json& j, const char* field, const std::string& at) {
  if (!j.is_string()) throw data_error(at + "field '" + field + "' must be a string");
  return j.get<std::string>();
}

DialogueExample parse_dialogue(const json& j, const std::string& at,
                               const Vocab* relations) {
  if (!j.is_object()) throw data_error(at + "record is not an object");
  static const std::set<std::string> known = {
      "history", "response", "initial_entities", "gold_path",
      "reasoning_type", "domain"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw data_error(at + "unknown field '" + k + "'");
  for (const char* req : {"history", "response", "initial_entities"})
    if (!j.contains(req))
      throw data_error(at + "missing required field '" + req + "'");

  DialogueExample ex;
  ex.history = string_list(j["history"], "history", at);
  if (ex.history.empty()) throw data_error(at + "history is empty");
  ex.response = string_field(j["response"], "response", at);
  if (normalize_name(ex.response).empty()) throw data_error(at + "response is empty");
  ex.initial_entities = string_list(j["initial_entities"], "initial_entities", at);
  if (ex.initial_entities.empty()) throw data_error(at + "initial_entities is empty");
  if (j.contains("gold_path")) {
    ex.gold_path = string_list(j["gold_path"], "gold_path", at);
    if (relations)
      for (const auto& r : *ex.gold_path)
        if (!relations->contains(r))
          throw data_error(at + "gold_path relation '" + r + "' not in KG");
  }
  if (j.contains("reasoning_type")) {
    ex.reasoning_type = string_field(j["reasoning_type"], "reasoning_type", at);
    if (!kReasoningTypes.count(*ex.reasoning_type))
      throw data_error(at + "unknown reasoning_type '" + *ex.reasoning_type + "'");
  }
  if (j.contains("domain")) ex.domain = string_field(j["domain"], "domain", at);
  return ex;
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  });
}

template <typename F>
void for_json_lines(const std::string& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open " + path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (blank(line)) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw data_error(where(path, n) + "malformed record: " + e.what());
    }
    f(j, where(path, n));
  }
}

}  // namespace

std::vector<DialogueExample> load_dialogues(const std::string& path,
                                            const Vocab* relations) {
  std::vector<DialogueExample> out;
  for_json_lines(path, [&](const json& j, const std::string& at) {
    out.push_back(parse_dialogue(j, at, relations));
  });
  return out;
}

void save_dialogues(const std::string& path,
                    std::span<const DialogueExample> examples) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  for (const auto& ex : examples) {
    json j = {{"history", ex.history},
              {"response", ex.response},
              {"initial_entities", ex.initial_entities}};
    if (ex.gold_path) j["gold_path"] = *ex.gold_path;
    if (ex.reasoning_type) j["reasoning_type"] = *ex.reasoning_type;
    if (ex.domain) j["domain"] = *ex.domain;
    out << j.dump() << '\n';
  }
  if (!out) throw data_error("write failed: " + path);
}

std::string flatten_history(const DialogueExample& ex) {
  std::string s;
  for (const auto& turn : ex.history) {
    if (!s.empty()) s += ' ';
    s += turn;
  }
  return s;
}

// ---- SMD -------------------------------------------------------------------

std::vector<SmdTableRecord> load_smd_tables(const std::string& path) {
  std::vector<SmdTableRecord> out;
  for_json_lines(path, [&](const json& j, const std::string& at) {
    if (!j.is_object() || !j.contains("domain") || !j.contains("item"))
      throw data_error(at + "table record needs 'domain' and 'item'");
    for (const auto& [k, v] : j.items())
      if (k != "domain" && k != "item")
        throw data_error(at + "unknown field '" + k + "'");
    SmdTableRecord rec;
    rec.domain = string_field(j["domain"], "domain", at);
    if (!j["item"].is_object()) throw data_error(at + "'item' must be an object");
    for (const auto& [k, v] : j["item"].items()) {
      if (!v.is_string()) throw data_error(at + "attribute '" + k + "' must be a string");
      rec.attributes[k] = v.get<std::string>();
    }
    out.push_back(std::move(rec));
  });
  return out;
}

std::size_t SmdKg::relation_inventory_size() const {
  std::size_t n = 0;
  for (const auto& [domain, rels] : relations_by_domain) n += rels.size();
  return n;
}

const std::map<std::string, std::vector<std::string>>& smd_relation_table() {
  static const std::map<std::string, std::vector<std::string>> table = {
      {"schedule",
       {"HasTime", "IsTimeOf", "HasDate", "IsDateOf", "HasParty", "IsPartyOf",
        "HasRoom", "IsRoomOf", "HasAgenda", "IsAgendaOf"}},
      {"navigation",
       {"HasAddress", "IsAddressOf", "HasType", "IsTypeOf", "HasTraffic",
        "IsTrafficOf", "HasDistance", "IsDistanceFrom"}},
      {"weather",
       {"HasLocation", "IsLocationOf", "HasDate", "IsDateOf", "HasWeather",
        "IsWeatherOf", "HasLowTemp", "IsLowTempOf", "HasHighTemp",
        "IsHighTempOf", "IsEqualTo"}},
  };
  return table;
}

namespace {

struct RelPair {
  const char* forward;
  const char* inverse;
};

const std::map<std::string, RelPair>& schedule_attrs() {
  static const std::map<std::string, RelPair> m = {
      {"time", {"HasTime", "IsTimeOf"}},
      {"date", {"HasDate", "IsDateOf"}},
      {"party", {"HasParty", "IsPartyOf"}},
      {"room", {"HasRoom", "IsRoomOf"}},
      {"agenda", {"HasAgenda", "IsAgendaOf"}},
  };
  return m;
}

const std::map<std::string, RelPair>& navigation_attrs() {
  static const std::map<std::string, RelPair> m = {
      {"address", {"HasAddress", "IsAddressOf"}},
      {"poi_type", {"HasType", "IsTypeOf"}},
      {"type", {"HasType", "IsTypeOf"}},
      {"traffic_info", {"HasTraffic", "IsTrafficOf"}},
      {"traffic", {"HasTraffic", "IsTrafficOf"}},
      {"distance", {"HasDistance", "IsDistanceFrom"}},
  };
  return m;
}

const std::vector<std::string>& weekdays() {
  static const std::vector<std::string> d = {"monday", "tuesday", "wednesday",
                                             "thursday", "friday", "saturday",
                                             "sunday"};
  return d;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

bool missing(const std::string& v) {
  const std::string t = trim(v);
  return t.empty() || t == "-";
}

struct Report {
  std::string weather, low, high;
};

// "clear skies, low of 50F, high of 60F"
Report split_report(const std::string& text) {
  Report r;
  std::vector<std::string> rest;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    if (comma == std::string::npos) comma = text.size();
    std::string part = trim(std::string_view(text).substr(start, comma - start));
    const std::string key = normalize_name(part);
    if (key.rfind("low of ", 0) == 0) {
      r.low = trim(std::string_view(part).substr(7));
    } else if (key.rfind("high of ", 0) == 0) {
      r.high = trim(std::string_view(part).substr(8));
    } else if (!part.empty()) {
      rest.push_back(part);
    }
    start = comma + 1;
  }
  for (const auto& p : rest) r.weather += (r.weather.empty() ? "" : ", ") + p;
  if (r.weather.empty() || r.low.empty() || r.high.empty())
    throw data_error("weather report '" + text +
                     "' lacks weather, low or high temperature");
  return r;
}

}  // namespace

SmdKg build_smd_kg(std::span<const SmdTableRecord> records) {
  SmdKg kg;
  auto emit = [&](const std::string& domain, const std::string& h,
                  const char* rel, const std::string& t) {
    kg.triples.push_back({h, rel, t});
    kg.relations_by_domain[domain].insert(rel);
  };

  struct WeatherKey {
    std::string location, day, report;
    auto operator<=>(const WeatherKey&) const = default;
  };
  std::set<WeatherKey> reports;
  std::vector<std::pair<std::string, std::string>> today;  // (day) equalities

  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    const std::string at = "table record " + std::to_string(i + 1) + ": ";
    if (rec.domain == "schedule" || rec.domain == "navigation") {
      const bool sched = rec.domain == "schedule";
      const char* key = sched ? "event" : "poi";
      const auto& attrs = sched ? schedule_attrs() : navigation_attrs();
      auto it = rec.attributes.find(key);
      if (it == rec.attributes.end() || missing(it->second))
        throw data_error(at + rec.domain + " item without '" + key + "'");
      const std::string item = trim(it->second);
      for (const auto& [attr, value] : rec.attributes) {
        if (attr == key) continue;
        auto rel = attrs.find(attr);
        if (rel == attrs.end())
          throw data_error(at + "unknown attribute '" + attr + "' for domain '" +
                           rec.domain + "'");
        if (missing(value)) continue;
        const std::string v = trim(value);
        emit(rec.domain, item, rel->second.forward, v);
        emit(rec.domain, v, rel->second.inverse, item);
      }
    } else if (rec.domain == "weather") {
      auto loc = rec.attributes.find("location");
      if (loc == rec.attributes.end() || missing(loc->second))
        throw data_error(at + "weather item without 'location'");
      for (const auto& [attr, value] : rec.attributes) {
        if (attr == "location") continue;
        if (attr == "today") {
          if (!missing(value)) today.push_back({"today", trim(value)});
          continue;
        }
        const auto& days = weekdays();
        if (std::find(days.begin(), days.end(), attr) == days.end())
          throw data_error(at + "unknown attribute '" + attr +
                           "' for domain 'weather'");
        if (missing(value)) continue;
        reports.insert({trim(loc->second), attr, trim(value)});
      }
    } else {
      throw data_error(at + "unknown domain '" + rec.domain + "'");
    }
  }

  // Report ids follow the sorted report set so they do not depend on the
  // order of the input records.
  std::size_t next_id = 0;
  for (const auto& w : reports) {
    const Report parts = split_report(w.report);
    const std::string id = "ReportID" + std::to_string(next_id++);
    const std::pair<const char*, const std::string*> rels[] = {
        {"HasLocation", &w.location}, {"HasDate", &w.day},
        {"HasWeather", &parts.weather}, {"HasLowTemp", &parts.low},
        {"HasHighTemp", &parts.high}};
    static const std::map<std::string, const char*> inverse = {
        {"HasLocation", "IsLocationOf"}, {"HasDate", "IsDateOf"},
        {"HasWeather", "IsWeatherOf"},   {"HasLowTemp", "IsLowTempOf"},
        {"HasHighTemp", "IsHighTempOf"}};
    for (const auto& [rel, value] : rels) {
      emit("weather", id, rel, *value);
      emit("weather", *value, inverse.at(rel), id);
    }
  }
  std::sort(today.begin(), today.end());
  today.erase(std::unique(today.begin(), today.end()), today.end());
  for (const auto& [t, day] : today) emit("weather", t, "IsEqualTo", day);
  return kg;
}

// ---- entity embeddings -----------------------------------------------------

EntityTokenLayout build_entity_layout(const Vocab& entities,
                                      const TokenVocab& tokens,
                                      std::optional<std::size_t> m) {
  std::vector<std::vector<std::uint32_t>> ids(entities.size());
  std::size_t longest = 0;
  for (std::uint32_t i = 0; i < entities.size(); ++i) {
    ids[i] = tokens.encode(entities.name(i));
    if (ids[i].empty())
      throw data_error("entity '" + entities.name(i) + "' has no tokens");
    longest = std::max(longest, ids[i].size());
  }
  EntityTokenLayout layout;
  layout.n_entities = entities.size();
  layout.m = m.value_or(longest);
  if (layout.m == 0) throw data_error("entity token length m must be >= 1");
  layout.token_rows.assign(layout.n_entities * layout.m, ad::kZeroRow);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i].size() > layout.m)
      throw data_error("entity '" + entities.name(static_cast<std::uint32_t>(i)) +
                       "' has " + std::to_string(ids[i].size()) +
                       " tokens, more than m=" + std::to_string(layout.m));
    for (std::size_t t = 0; t < ids[i].size(); ++t)
      layout.token_rows[i * layout.m + t] = ids[i][t];
  }
  return layout;
}

ad::Var entity_tensor(ad::Var embedding_table, const EntityTokenLayout& layout) {
  const std::size_t d = embedding_table.cols();
  return ad::reshape(ad::gather_rows(embedding_table, layout.token_rows),
                     layout.n_entities, layout.m * d);
}

EntityEmbeddingTensor build_entity_tensor(const Vocab& entities,
                                          const TokenVocab& tokens,
                                          const Tensor& embedding_table,
                                          std::optional<std::size_t> m) {
  if (embedding_table.rows < tokens.size())
    throw data_error("embedding table does not cover the token vocabulary");
  const EntityTokenLayout layout = build_entity_layout(entities, tokens, m);
  EntityEmbeddingTensor e;
  e.n_entities = layout.n_entities;
  e.d = embedding_table.cols;
  e.m = layout.m;
  e.values = Tensor(e.n_entities, e.m * e.d, 0.0);
  for (std::size_t i = 0; i < e.n_entities; ++i)
    for (std::size_t t = 0; t < e.m; ++t) {
      const auto row = layout.token_rows[i * e.m + t];
      if (row == ad::kZeroRow) continue;
      for (std::size_t k = 0; k < e.d; ++k)
        e.values(i, t * e.d + k) = embedding_table(static_cast<std::size_t>(row), k);
    }
  return e;
}

// ---- synthetic corpora -------------------------------------------------------

void SynthConfig::validate() const {
  if (n_entities < 10) throw usage_error("n_entities must be >= 10");
  if (n_relations < 2) throw usage_error("n_relations must be >= 2");
  if (n_triples < 1) throw usage_error("n_triples must be >= 1");
  if (hops_max < 1) throw usage_error("hops_max must be >= 1");
  if (hops_max > max_hops_model)
    throw usage_error("hops_max " + std::to_string(hops_max) +
                      " exceeds the model hop count " +
                      std::to_string(max_hops_model));
  if (n_train < 1 || n_valid < 1 || n_test < 1)
    throw usage_error("every split needs at least one example");
  const double mix[] = {mix_inform, mix_selection, mix_true_false, mix_extraction};
  double total = 0.0;
  for (double x : mix) {
    if (!(x >= 0.0) || !std::isfinite(x))
      throw usage_error("reasoning mix entries must be >= 0");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-6)
    throw usage_error("reasoning mix must sum to 1, got " + std::to_string(total));
}

std::vector<std::string> synth_relation_names(std::size_t n_relations) {
  static const char* pool[] = {"owner",   "maker",    "origin",  "home",
                               "employer", "leader",  "color",   "size",
                               "partner", "founder",  "rival",   "mentor",
                               "sponsor", "neighbor", "designer", "supplier"};
  std::vector<std::string> out{"distance"};
  for (std::size_t i = 1; i < n_relations; ++i)
    out.push_back(i - 1 < std::size(pool) ? pool[i - 1] : "rel" + std::to_string(i));
  return out;
}

namespace {

enum class QType { inform, selection, true_false, extraction };

const char* qtype_name(QType t) {
  switch (t) {
    case QType::inform: return "inform";
    case QType::selection: return "selection";
    case QType::true_false: return "true_false";
    case QType::extraction: return "extraction";
  }
  return "";
}

// Largest-remainder apportionment of n examples over the mix.
std::vector<std::size_t> apportion(std::size_t n, const double (&mix)[4]) {
  std::vector<std::size_t> counts(4);
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double exact = mix[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    rem.push_back({exact - std::floor(exact), i});
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; assigned < n; ++j, ++assigned) ++counts[rem[j % 4].second];
  return counts;
}

class Generator {
 public:
  Generator(const SynthConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), rng_(substream(seed, "data")) {
    rel_names_ = synth_relation_names(cfg.n_relations);
    build_kg();
  }

  SynthDataset run() {
    SynthDataset ds;
    ds.triples = triples_;
    ds.absent_attributes = absent_;
    ds.train = split(cfg_.n_train);
    ds.valid = split(cfg_.n_valid);
    ds.test = split(cfg_.n_test);
    return ds;
  }

 private:
  static constexpr std::size_t kMaxAttempts = 10000;

  void build_kg() {
    const std::size_t n_numeric = std::max<std::size_t>(3, cfg_.n_entities / 10);
    if (n_numeric + 4 > cfg_.n_entities)
      throw usage_error("n_entities too small for the synthetic KG");
    n_regular_ = cfg_.n_entities - n_numeric;
    if (cfg_.n_triples < n_regular_)
      throw usage_error("n_triples must cover one distance per regular entity (" +
                        std::to_string(n_regular_) + ")");
    const std::size_t extra = cfg_.n_triples - n_regular_;
    const std::size_t capacity = n_regular_ * (cfg_.n_relations - 1);
    if (extra > capacity)
      throw usage_error("n_triples exceeds what a functional KG of this size holds");
    const bool needs_chains = cfg_.mix_inform > 0.0 || cfg_.mix_true_false > 0.0;
    if (needs_chains && cfg_.n_relations - 1 < cfg_.hops_max)
      throw usage_error("need at least hops_max non-numeric relations");

    for (std::size_t i = 0; i < n_regular_; ++i) names_.push_back("e" + std::to_string(i));
    for (std::size_t v = 1; v <= n_numeric; ++v)
      names_.push_back(std::to_string(v) + " km");

    // Relation 0 is the numeric attribute; the others are split into levels
    // 1..hops_max so that a chain uses one relation from each level in order.
    levels_.assign(cfg_.hops_max + 1, {});
    for (std::size_t r = 1; r < cfg_.n_relations; ++r)
      levels_[(r - 1) % cfg_.hops_max + 1].push_back(r);

    // Every numeric value is used at least once.
    std::vector<std::size_t> order(n_regular_);
    std::iota(order.begin(), order.end(), 0);
    shuffle_range(order.begin(), order.end(), rng_);
    for (std::size_t j = 0; j < n_regular_; ++j) {
      const std::size_t value =
          j < n_numeric ? j : uniform_index(rng_, n_numeric);
      set(order[j], 0, n_regular_ + value);
    }

    std::vector<std::pair<std::size_t, std::size_t>> slots;
    for (std::size_t e = 0; e < n_regular_; ++e)
      for (std::size_t r = 1; r < cfg_.n_relations; ++r) slots.push_back({e, r});
    shuffle_range(slots.begin(), slots.end(), rng_);
    slots.resize(extra);
    std::sort(slots.begin(), slots.end());
    for (auto [e, r] : slots) {
      std::size_t t = uniform_index(rng_, n_regular_ - 1);
      if (t >= e) ++t;
      set(e, r, t);
    }
    if (needs_chains && levels_[1].empty())
      throw usage_error("no relations available for chains");
  }

  void set(std::size_t head, std::size_t rel, std::size_t tail) {
    fn_[key(head, rel)] = tail;
    triples_.push_back({names_[head], rel_names_[rel], names_[tail]});
  }

  std::uint64_t key(std::size_t head, std::size_t rel) const {
    return static_cast<std::uint64_t>(head) * cfg_.n_relations + rel;
  }

  std::optional<std::size_t> follow(std::size_t head, std::size_t rel) const {
    auto it = fn_.find(key(head, rel));
    if (it == fn_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t pick(std::span<const std::size_t> v) {
    return v[uniform_index(rng_, v.size())];
  }

  std::vector<std::string> maybe_greeting(std::string question) {
    static const char* greetings[] = {"hello", "hi", "hey there", "good morning"};
    if (uniform_unit(rng_) < 0.5) {
      const char* g = greetings[uniform_index(rng_, std::size(greetings))];
      return {g, "hello , how can i help ?", std::move(question)};
    }
    return {std::move(question)};
  }

  std::optional<DialogueExample> inform() {
    const std::size_t hops = 1 + uniform_index(rng_, cfg_.hops_max);
    std::vector<std::size_t> rels;
    for (std::size_t h = 1; h <= hops; ++h) rels.push_back(pick(levels_[h]));
    const std::size_t start = uniform_index(rng_, n_regular_);
    std::size_t cur = start;
    for (auto r : rels) {
      auto next = follow(cur, r);
      if (!next) return std::nullopt;
      cur = *next;
    }
    std::string q = "what is the";
    for (std::size_t h = hops; h-- > 0;)
      q += " " + rel_names_[rels[h]] + (h > 0 ? " of the" : " of");
    q += " " + names_[start] + " ?";
    DialogueExample ex;
    ex.history = maybe_greeting(q);
    ex.response = "inform " + names_[cur];
    ex.initial_entities = {names_[start]};
    ex.gold_path.emplace();
    for (auto r : rels) ex.gold_path->push_back(rel_names_[r]);
    return ex;
  }

  std::optional<DialogueExample> selection() {
    const std::size_t n_cand = 2 + uniform_index(rng_, 2);
    std::vector<std::size_t> cands;
    std::set<std::size_t> values;
    while (cands.size() < n_cand) {
      const std::size_t e = uniform_index(rng_, n_regular_);
      const std::size_t v = *follow(e, 0);
      if (values.count(v)) continue;
      values.insert(v);
      cands.push_back(e);
    }
    const bool lowest = uniform_unit(rng_) < 0.5;
    // Numeric entities are ordered by value.
    const std::size_t answer = lowest ? *values.begin() : *values.rbegin();
    std::string q = std::string("which distance is the ") +
                    (lowest ? "lowest" : "highest") + " among";
    DialogueExample ex;
    for (auto c : cands) {
      q += " " + names_[c];
      ex.initial_entities.push_back(names_[c]);
    }
    q += " ?";
    ex.history = maybe_greeting(q);
    ex.response = "inform " + names_[answer];
    ex.gold_path = std::vector<std::string>{rel_names_[0]};
    return ex;
  }

  std::optional<DialogueExample> true_false(bool label) {
    const std::size_t r = pick(levels_[1]);
    const std::size_t e = uniform_index(rng_, n_regular_);
    auto actual = follow(e, r);
    if (!actual) return std::nullopt;
    std::size_t claim = *actual;
    if (!label) {
      claim = uniform_index(rng_, n_regular_ - 1);
      if (claim >= *actual) ++claim;
    }
    DialogueExample ex;
    ex.history = maybe_greeting("is the " + rel_names_[r] + " of " + names_[e] +
                                " " + names_[claim] + " ?");
    ex.response = label ? "true" : "false";
    ex.initial_entities = {names_[e]};
    ex.gold_path = std::vector<std::string>{rel_names_[r]};
    return ex;
  }

  std::optional<DialogueExample> extraction() {
    const std::string& attr = absent_[uniform_index(rng_, absent_.size())];
    const std::size_t e = uniform_index(rng_, n_regular_);
    DialogueExample ex;
    ex.history = maybe_greeting("what is the " + attr + " of " + names_[e] + " ?");
    ex.response = "include " + attr;
    ex.initial_entities = {names_[e]};
    return ex;
  }

  std::vector<DialogueExample> split(std::size_t n) {
    const double mix[4] = {cfg_.mix_inform, cfg_.mix_selection,
                           cfg_.mix_true_false, cfg_.mix_extraction};
    const auto counts = apportion(n, mix);
    std::vector<QType> plan;
    for (std::size_t i = 0; i < 4; ++i) plan.insert(plan.end(), counts[i], QType(i));
    shuffle_range(plan.begin(), plan.end(), rng_);

    std::vector<DialogueExample> out;
    std::size_t tf_index = 0;
    for (QType t : plan) {
      const bool label = tf_index % 2 == 0;
      if (t == QType::true_false) ++tf_index;
      bool done = false;
      for (std::size_t attempt = 0; attempt < kMaxAttempts && !done; ++attempt) {
        std::optional<DialogueExample> ex;
        switch (t) {
          case QType::inform: ex = inform(); break;
          case QType::selection: ex = selection(); break;
          case QType::true_false: ex = true_false(label); break;
          case QType::extraction: ex = extraction(); break;
        }
        if (!ex) continue;
        // Splits stay disjoint: no question appears twice in the corpus.
        std::string id = ex->history.back();
        if (!seen_.insert(id).second) continue;
        ex->reasoning_type = qtype_name(t);
        out.push_back(std::move(*ex));
        done = true;
      }
      if (!done)
        throw usage_error(std::string("cannot generate enough distinct ") +
                          qtype_name(t) + " examples for this config");
    }
    return out;
  }

  const SynthConfig& cfg_;
  std::mt19937_64 rng_;
  std::vector<std::string> rel_names_;
  std::vector<std::string> names_;
  std::size_t n_regular_ = 0;
  std::vector<std::vector<std::size_t>> levels_;
  std::unordered_map<std::uint64_t, std::size_t> fn_;
  std::vector<StringTriple> triples_;
  std::vector<std::string> absent_ = {"price", "parking", "rating",
                                      "phone", "hours",   "menu"};
  std::unordered_set<std::string> seen_;
};

}  // namespace

SynthDataset gen_synthetic(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  return Generator(config, seed).run();
}

}  // namespace dkg
