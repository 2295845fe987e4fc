#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dkg/diffmath.hpp"
#include "dkg/kg_store.hpp"
#include "dkg/tokenizer.hpp"

namespace dkg {

// ---- dialogues ------------------------------------------------------------

struct DialogueExample {
  std::vector<std::string> history;  // turns in order, alternating speakers
  std::string response;
  std::vector<std::string> initial_entities;
  std::optional<std::vector<std::string>> gold_path;
  std::optional<std::string> reasoning_type;  // inform|selection|true_false|extraction
  std::optional<std::string> domain;

  friend bool operator==(const DialogueExample&, const DialogueExample&) = default;
};

/// One JSON object per line. Unknown fields are rejected; when `relations`
/// is given, gold_path names must resolve in it.
std::vector<DialogueExample> load_dialogues(const std::string& path,
                                            const Vocab* relations = nullptr);
void save_dialogues(const std::string& path,
                    std::span<const DialogueExample> examples);

/// Flattened history x = x_1 .. x_M: turns joined in order.
std::string flatten_history(const DialogueExample& ex);

// ---- SMD-style tables -----------------------------------------------------

/// One table row: a domain and its attribute -> value map.
struct SmdTableRecord {
  std::string domain;  // schedule | navigation | weather
  std::map<std::string, std::string> attributes;
};

/// One JSON object per line: {"domain": ..., "item": {attr: value, ...}}.
std::vector<SmdTableRecord> load_smd_tables(const std::string& path);

struct SmdKg {
  std::vector<StringTriple> triples;
  std::map<std::string, std::set<std::string>> relations_by_domain;

  /// Sum over domains of the relations each domain uses.
  std::size_t relation_inventory_size() const;
};

/// Schedule/navigation items become (item, HasAttr, value) plus the inverse;
/// each weather (location, day) report becomes a ReportID<n> entity with
/// location/date/weather/low/high relations and their inverses.
SmdKg build_smd_kg(std::span<const SmdTableRecord> records);

/// The relations listed per domain for the SMD construction.
const std::map<std::string, std::vector<std::string>>& smd_relation_table();

// ---- entity embeddings ----------------------------------------------------

/// Token ids of every entity padded to a common length m.
struct EntityTokenLayout {
  std::size_t n_entities = 0;
  std::size_t m = 0;
  std::vector<std::int64_t> token_rows;  // N_E * m, ad::kZeroRow for padding
};

/// m defaults to the longest entity name in tokens. Throws when an entity
/// tokenizes to nothing or is longer than an explicit m.
EntityTokenLayout build_entity_layout(const Vocab& entities,
                                      const TokenVocab& tokens,
                                      std::optional<std::size_t> m = std::nullopt);

/// E on a tape: N_E x (m*d), row i = concatenated token embeddings of entity
/// i with zero padding, differentiable w.r.t. the embedding table.
ad::Var entity_tensor(ad::Var embedding_table, const EntityTokenLayout& layout);

/// Materialized E with values copied from `embedding_table` (V x d).
struct EntityEmbeddingTensor {
  std::size_t n_entities = 0;
  std::size_t d = 0;
  std::size_t m = 0;
  Tensor values;  // N_E x (m*d)

  double at(std::size_t entity, std::size_t dim, std::size_t token) const {
    return values(entity, token * d + dim);
  }
};

EntityEmbeddingTensor build_entity_tensor(const Vocab& entities,
                                          const TokenVocab& tokens,
                                          const Tensor& embedding_table,
                                          std::optional<std::size_t> m = std::nullopt);

// ---- synthetic corpora ------------------------------------------------------

struct SynthConfig {
  std::size_t n_entities = 200;
  std::size_t n_relations = 8;
  std::size_t n_triples = 1200;
  std::size_t hops_max = 3;
  std::size_t n_train = 3000;
  std::size_t n_valid = 500;
  std::size_t n_test = 500;
  double mix_inform = 0.4;
  double mix_selection = 0.2;
  double mix_true_false = 0.2;
  double mix_extraction = 0.2;
  std::size_t max_hops_model = 5;  // H of the intended model

  void validate() const;
};

struct SynthDataset {
  std::vector<StringTriple> triples;
  std::vector<DialogueExample> train, valid, test;
  std::vector<std::string> absent_attributes;
};

/// Random functional KG plus templated questions of the four reasoning
/// types. Deterministic given (config, seed).
SynthDataset gen_synthetic(const SynthConfig& config, std::uint64_t seed);

/// Relation names the generator uses for a given relation count; index 0 is
/// the numeric attribute.
std::vector<std::string> synth_relation_names(std::size_t n_relations);

}  // namespace dkg
