#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dkg/diffmath.hpp"
#include "dkg/encoder.hpp"
#include "dkg/kg_store.hpp"

namespace dkg {

struct ReasonerConfig {
  std::size_t hops = 5;  // H
  double eps = 1e-12;
  std::size_t top_k = 8;

  void validate(std::size_t n_entities) const;
};

/// normalize_eps(M_t^T ((M_h e) . (M_r r)), eps)
ad::Var next_hop(ad::Var e, ad::Var r, const ReifiedKG& kg, double eps);

/// M_t^T ((M_h e) . (M_r r)) without normalization.
ad::Var follow_unnormalized(ad::Var e, ad::Var r, const ReifiedKG& kg);

/// Per-entity match score a^T meanpool_m(E[i]) (independent of the hop).
/// `entity_tensor` is N_E x (m*d): row i holds entity i's m token embeddings.
ad::Var operation_scores(ad::Var a, ad::Var entity_tensor, std::size_t m);

/// softmax(scores . e): the check step given precomputed scores.
ad::Var operate_with_scores(ad::Var e, ad::Var scores);

/// softmax_i(a^T meanpool_m(E[i] * e[i]))
ad::Var operate(ad::Var e, ad::Var a, ad::Var entity_tensor, std::size_t m);

/// c[0] * walk + c[1] * check. Throws when c is not a distribution.
ad::Var combine(ad::Var gate, ad::Var walk, ad::Var check);

struct HopRecord {
  Tensor entities;   // post-combination entity weights after the hop
  Tensor relations;  // r_h
  Tensor gate;       // c_h
};

struct HopTrace {
  Tensor initial;  // e_1
  std::vector<HopRecord> hops;
  Tensor final_entities;
};

struct Traversal {
  ad::Var entities;  // e after the last hop
  HopTrace trace;
};

/// Runs H hops: next_hop, operate (full mode only), combine.
/// `entity_tensor` is required in full mode and ignored in walk-only mode.
Traversal traverse(ad::Var e1, const HeadOutputs& heads, const ReifiedKG& kg,
                   std::optional<ad::Var> entity_tensor, std::size_t m,
                   const ReasonerConfig& cfg, Mode mode);

struct Retrieved {
  std::vector<std::uint32_t> ids;  // descending weight, ties by lower index
  std::vector<double> weights;
  ad::Var blocks;  // k x (m*d): E[id] scaled by its weight
};

Retrieved top_k_entities(ad::Var entities, ad::Var entity_tensor, std::size_t k);

/// Indices of the k largest values, ties broken by lower index.
std::vector<std::uint32_t> top_k_indices(std::span<const double> values,
                                         std::size_t k);

struct RankedPath {
  std::vector<std::uint32_t> relations;  // trailing ToSelf stripped
  double score = 0.0;
};

/// Beam search over per-hop relation choices restricted to relations
/// supported by the symbolic frontier. Score = product of chosen r_h entries.
std::vector<RankedPath> extract_paths(const HopTrace& trace, const ReifiedKG& kg,
                                      std::uint32_t to_self,
                                      std::size_t beam_width);

/// Strips trailing `to_self` entries.
std::vector<std::uint32_t> strip_trailing(std::vector<std::uint32_t> path,
                                          std::uint32_t to_self);

/// Line-oriented hop-by-hop rendering: hop index, top-3 relations,
/// top-3 entities, and the walk gate (omitted in walk-only mode).
std::string format_trace(const HopTrace& trace, const Vocabs& vocabs, Mode mode);

}  // namespace dkg
