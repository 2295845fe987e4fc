#include "dkg/gradcheck.hpp"

#include <algorithm>

#include "dkg/data.hpp"
#include "dkg/error.hpp"
#include "dkg/model.hpp"
#include "dkg/rng.hpp"

namespace dkg {

void GradcheckConfig::validate() const {
  if (d < 1 || hops < 1) throw usage_error("gradcheck: d and H must be >= 1");
  if (n_entities < 2) throw usage_error("gradcheck: n_entities must be >= 2");
  if (n_relations < 2) throw usage_error("gradcheck: n_relations must be >= 2");
  if (vocab < 5 + n_entities)
    throw usage_error("gradcheck: vocab must exceed 4 reserved + entity tokens");
  if (top_k < 1 || top_k > n_entities)
    throw usage_error("gradcheck: top_k must be in [1, n_entities]");
  if (history_len < 1 || response_len < 1)
    throw usage_error("gradcheck: history and response lengths must be >= 1");
  if (!(h > 0.0)) throw usage_error("gradcheck: h must be > 0");
  if (!(init_scale > 0.0)) throw usage_error("gradcheck: init_scale must be > 0");
}

void apply_config(GradcheckConfig& cfg, const ConfigMap& map) {
  map.require_known({"d", "H", "n_entities", "n_relations", "vocab", "top_k",
                     "history_len", "response_len", "init_scale", "h", "tolerance",
                     "mode", "path_loss_weight"});
  map.get("d", cfg.d);
  map.get("H", cfg.hops);
  map.get("n_entities", cfg.n_entities);
  map.get("n_relations", cfg.n_relations);
  map.get("vocab", cfg.vocab);
  map.get("top_k", cfg.top_k);
  map.get("history_len", cfg.history_len);
  map.get("response_len", cfg.response_len);
  map.get("init_scale", cfg.init_scale);
  map.get("h", cfg.h);
  map.get("tolerance", cfg.tolerance);
  std::string mode = to_string(cfg.mode);
  map.get("mode", mode);
  cfg.mode = parse_mode(mode);
  map.get("path_loss_weight", cfg.path_loss_weight);
}

GradcheckReport run_gradcheck(const GradcheckConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  auto rng = substream(seed, "data");
  const std::size_t n_rel = cfg.n_relations - 1;  // ToSelf is added on ingest

  std::vector<StringTriple> triples;
  auto ent = [](std::size_t i) { return "e" + std::to_string(i); };
  auto rel = [](std::size_t i) { return "r" + std::to_string(i); };
  auto other = [&](std::size_t head) {
    std::size_t t = uniform_index(rng, cfg.n_entities - 1);
    return t >= head ? t + 1 : t;
  };
  for (std::size_t i = 0; i < cfg.n_entities; ++i)
    triples.push_back({ent(i), rel(i % n_rel), ent(other(i))});
  for (std::size_t j = 0; j < cfg.n_entities; ++j) {
    const std::size_t h = uniform_index(rng, cfg.n_entities);
    triples.push_back({ent(h), rel(uniform_index(rng, n_rel)), ent(other(h))});
  }
  for (std::size_t r = cfg.n_entities; r < n_rel; ++r)
    triples.push_back({ent(0), rel(r), ent(1)});
  const KnowledgeGraph kg = build_knowledge_graph(triples);

  TokenVocab tokens;
  for (const auto& name : kg.vocabs.entities.names()) tokens.add_text(name);
  for (std::size_t w = 0; tokens.size() < cfg.vocab; ++w)
    tokens.add_token("w" + std::to_string(w));

  auto word = [&] {
    return tokens.token(static_cast<std::uint32_t>(4 + uniform_index(rng, cfg.vocab - 4)));
  };
  DialogueExample ex;
  std::string turn;
  for (std::size_t i = 0; i < cfg.history_len; ++i) turn += (i ? " " : "") + word();
  ex.history = {turn};
  for (std::size_t i = 0; i < cfg.response_len; ++i)
    ex.response += (i ? " " : "") + word();
  ex.initial_entities = {ent(uniform_index(rng, cfg.n_entities))};
  if (uniform_unit(rng) < 0.5) ex.initial_entities.push_back(ent(other(0)));
  ex.gold_path.emplace();
  const std::size_t len = 1 + uniform_index(rng, cfg.hops);
  for (std::size_t i = 0; i < len; ++i) ex.gold_path->push_back(rel(uniform_index(rng, n_rel)));
  const EncodedExample enc = encode_example(ex, 0, kg, tokens, cfg.hops);
  const EntityTokenLayout layout = build_entity_layout(kg.vocabs.entities, tokens);

  ModelDims dims;
  dims.vocab = tokens.size();
  dims.hidden = cfg.d;
  dims.n_entities = kg.reified.n_entities();
  dims.n_relations = kg.reified.n_relations();
  dims.hops = cfg.hops;
  dims.entity_tokens = layout.m;
  if (dims.n_relations != cfg.n_relations)
    throw usage_error("gradcheck: could not realize the requested relation count");
  ModelParams params = ModelParams::create(dims);
  auto init = substream(seed, "init");
  for (double& x : params.store.data())
    x = cfg.init_scale * (2.0 * uniform_unit(init) - 1.0);

  ModelSpec spec;
  spec.reasoner.hops = cfg.hops;
  spec.reasoner.top_k = cfg.top_k;
  spec.mode = cfg.mode;
  spec.path_loss_weight = cfg.path_loss_weight;

  GradcheckReport report;
  std::vector<Tensor> leaves;
  for (std::size_t i = 0; i < params.store.n_blocks(); ++i)
    leaves.push_back(params.store.tensor(i));
  const ad::Program all = [&](ad::Tape&, std::span<const ad::Var> vars) {
    BoundParams b{std::vector<ad::Var>(vars.begin(), vars.end())};
    return combined_loss(b, dims, kg, layout, enc, spec);
  };
  const auto res = ad::grad_check(all, leaves, cfg.h);
  for (std::size_t i = 0; i < params.store.n_blocks(); ++i)
    report.blocks.push_back(
        {params.store.block(i).name, params.store.block(i).size(), res.per_param[i]});

  // The entity tensor as an independent input isolates the check/retrieval
  // path from the embedding table it is normally built from.
  std::vector<Tensor> ents{
      build_entity_tensor(kg.vocabs.entities, tokens, params.store.tensor(kTokenEmbedding))
          .values};
  const ad::Program via_entities = [&](ad::Tape& tape, std::span<const ad::Var> vars) {
    BoundParams b = bind(tape, params, false);
    return *run_model(b, dims, kg, layout, enc, spec, true, vars[0]).loss;
  };
  const auto eres = ad::grad_check(via_entities, ents, cfg.h);
  report.blocks.push_back({"entity_tensor", ents[0].size(), eres.per_param[0]});

  for (const auto& b : report.blocks)
    report.max_rel_err = std::max(report.max_rel_err, b.max_rel_err);
  return report;
}

}  // namespace dkg
