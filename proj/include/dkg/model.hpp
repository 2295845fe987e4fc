#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dkg/data.hpp"
#include "dkg/decoder.hpp"
#include "dkg/diffmath.hpp"
#include "dkg/encoder.hpp"
#include "dkg/kg_store.hpp"
#include "dkg/params.hpp"
#include "dkg/reasoner.hpp"
#include "dkg/tokenizer.hpp"

namespace dkg {

/// Settings the forward pass needs beyond the parameters.
struct ModelSpec {
  ReasonerConfig reasoner;
  Mode mode = Mode::full;
  double path_loss_weight = 1.0;  // lambda
};

/// Token vocabulary over the training dialogues plus every entity name, so
/// that each entity has embeddings for its tokens.
TokenVocab build_token_vocab(std::span<const DialogueExample> train,
                             const Vocab& entities);

/// A dialogue example resolved against the KG and token vocabulary.
struct EncodedExample {
  std::size_t index = 0;  // position in its source file
  std::vector<std::uint32_t> history;
  std::vector<std::uint32_t> target;  // response tokens + EOS
  Tensor initial;                     // e_1 indicator
  /// Gold relation per hop, padded with ToSelf to H; empty without a path.
  std::vector<std::uint32_t> gold_relations;
  std::vector<std::uint32_t> gold_path;  // unpadded
};

EncodedExample encode_example(const DialogueExample& ex, std::size_t index,
                              const KnowledgeGraph& kg, const TokenVocab& tokens,
                              std::size_t hops);

std::vector<EncodedExample> encode_examples(std::span<const DialogueExample> data,
                                            const KnowledgeGraph& kg,
                                            const TokenVocab& tokens,
                                            std::size_t hops);

/// Everything the forward pass produced for one example.
struct Forward {
  HeadOutputs heads;
  Traversal traversal;
  Retrieved retrieved;
  DecoderContext context;
  std::optional<ad::Var> response_loss;
  std::optional<ad::Var> path_loss;
  std::optional<ad::Var> loss;  // response + lambda * path
};

/// Encoder, heads, traversal, retrieval and decoder context; with
/// `with_loss` also the combined loss. When `entity_override` is given it
/// replaces the entity tensor built from the token embeddings.
Forward run_model(const BoundParams& params, const ModelDims& dims,
                  const KnowledgeGraph& kg, const EntityTokenLayout& layout,
                  const EncodedExample& ex, const ModelSpec& spec,
                  bool with_loss,
                  std::optional<ad::Var> entity_override = std::nullopt);

/// L_response + lambda * sum_h -log r_h[gold_h]. The path term is skipped for
/// examples without a gold path in full mode; walk-only mode requires one
/// whenever lambda > 0.
ad::Var combined_loss(const BoundParams& params, const ModelDims& dims,
                      const KnowledgeGraph& kg, const EntityTokenLayout& layout,
                      const EncodedExample& ex, const ModelSpec& spec);

struct Prediction {
  std::vector<std::uint32_t> tokens;
  std::vector<RankedPath> paths;
  HopTrace trace;
};

Prediction predict(const ModelParams& params, const KnowledgeGraph& kg,
                   const EntityTokenLayout& layout, const EncodedExample& ex,
                   const ModelSpec& spec, std::size_t beam_width,
                   std::size_t max_len);

}  // namespace dkg
