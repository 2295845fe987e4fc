#include "dkg/model.hpp"

#include "dkg/error.hpp"

namespace dkg {

TokenVocab build_token_vocab(std::span<const DialogueExample> train,
                             const Vocab& entities) {
  TokenVocab v;
  for (const auto& ex : train) {
    for (const auto& turn : ex.history) v.add_text(turn);
    v.add_text(ex.response);
  }
  for (const auto& name : entities.names()) v.add_text(name);
  return v;
}

EncodedExample encode_example(const DialogueExample& ex, std::size_t index,
                              const KnowledgeGraph& kg, const TokenVocab& tokens,
                              std::size_t hops) {
  const std::string at = "example " + std::to_string(index + 1) + ": ";
  EncodedExample out;
  out.index = index;
  out.history = tokens.encode(flatten_history(ex));
  if (out.history.empty()) throw data_error(at + "history has no tokens");
  out.target = tokens.encode(ex.response);
  out.target.push_back(TokenVocab::kEos);
  try {
    out.initial = initial_entity_vector(ex.initial_entities, kg.vocabs.entities);
  } catch (const Error& e) {
    throw data_error(at + e.what());
  }
  if (ex.gold_path) {
    if (ex.gold_path->size() > hops)
      throw data_error(at + "gold path has " + std::to_string(ex.gold_path->size()) +
                       " relations, more than H=" + std::to_string(hops));
    for (const auto& r : *ex.gold_path) {
      auto id = kg.vocabs.relations.find(r);
      if (!id) throw data_error(at + "gold relation '" + r + "' not in KG");
      out.gold_path.push_back(*id);
    }
    out.gold_relations = out.gold_path;
    out.gold_relations.resize(hops, kg.to_self());
  }
  return out;
}

std::vector<EncodedExample> encode_examples(std::span<const DialogueExample> data,
                                            const KnowledgeGraph& kg,
                                            const TokenVocab& tokens,
                                            std::size_t hops) {
  std::vector<EncodedExample> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    out.push_back(encode_example(data[i], i, kg, tokens, hops));
  return out;
}

Forward run_model(const BoundParams& params, const ModelDims& dims,
                  const KnowledgeGraph& kg, const EntityTokenLayout& layout,
                  const EncodedExample& ex, const ModelSpec& spec,
                  bool with_loss, std::optional<ad::Var> entity_override) {
  spec.reasoner.validate(kg.reified.n_entities());
  if (spec.reasoner.hops != dims.hops)
    throw usage_error("reasoner H does not match the model's H");
  ad::Tape& tape = *params[kTokenEmbedding].tape;

  Forward f;
  ad::Var x = encode_history(ex.history, params);
  f.heads = predict_heads(x, params, dims, spec.mode);
  ad::Var ents = entity_override ? *entity_override
                                 : entity_tensor(params[kTokenEmbedding], layout);
  ad::Var e1 = tape.constant(ex.initial);
  f.traversal = traverse(e1, f.heads, kg.reified, ents, layout.m, spec.reasoner,
                         spec.mode);
  f.retrieved = top_k_entities(f.traversal.entities, ents, spec.reasoner.top_k);
  f.context = build_context(ex.history, f.retrieved.blocks, layout.m, params);
  if (!with_loss) return f;

  f.response_loss = decode_loss(f.context, ex.target, params);
  f.loss = f.response_loss;
  if (spec.path_loss_weight > 0.0) {
    if (ex.gold_relations.empty()) {
      if (spec.mode == Mode::walk_only)
        throw data_error("example " + std::to_string(ex.index + 1) +
                         ": walk-only training with path supervision needs a gold path");
    } else {
      std::vector<ad::Var> terms;
      for (std::size_t h = 0; h < dims.hops; ++h)
        terms.push_back(
            ad::cross_entropy(f.heads.relation_logits[h], ex.gold_relations[h]));
      f.path_loss = ad::sum(ad::concat(terms));
      f.loss = ad::add(*f.loss, ad::scale(*f.path_loss, spec.path_loss_weight));
    }
  }
  return f;
}

ad::Var combined_loss(const BoundParams& params, const ModelDims& dims,
                      const KnowledgeGraph& kg, const EntityTokenLayout& layout,
                      const EncodedExample& ex, const ModelSpec& spec) {
  return *run_model(params, dims, kg, layout, ex, spec, true).loss;
}

Prediction predict(const ModelParams& params, const KnowledgeGraph& kg,
                   const EntityTokenLayout& layout, const EncodedExample& ex,
                   const ModelSpec& spec, std::size_t beam_width,
                   std::size_t max_len) {
  ad::Tape tape;
  BoundParams bound = bind(tape, params, false);
  Forward f = run_model(bound, params.dims, kg, layout, ex, spec, false);
  Prediction p;
  p.tokens = generate(f.context, bound, max_len);
  p.trace = f.traversal.trace;
  p.paths = extract_paths(p.trace, kg.reified, kg.to_self(), beam_width);
  return p;
}

}  // namespace dkg
