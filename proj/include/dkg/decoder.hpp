#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dkg/diffmath.hpp"
#include "dkg/params.hpp"

namespace dkg {

/// Decoder input sequence: history token embeddings followed by the retrieved
/// entity blocks (k blocks of m token rows, weight-scaled), one row per
/// position of width d.
struct DecoderContext {
  ad::Var rows;  // (M + k*m) x d
  std::size_t history_len = 0;
  std::size_t entity_rows = 0;
};

/// `entity_blocks` is k x (m*d) as produced by top_k_entities; pass
/// std::nullopt-like empty (0 rows) only when k == 0 is intended.
DecoderContext build_context(std::span<const std::uint32_t> history,
                             ad::Var entity_blocks, std::size_t m,
                             const BoundParams& params);

/// Sum over target positions of -log P(y_t | y_<t, context) with teacher
/// forcing. `target` must end with EOS.
ad::Var decode_loss(const DecoderContext& ctx,
                    std::span<const std::uint32_t> target,
                    const BoundParams& params);

/// Greedy decoding from BOS until EOS or max_len tokens; argmax ties go to
/// the lowest token id. The returned sequence excludes EOS.
std::vector<std::uint32_t> generate(const DecoderContext& ctx,
                                    const BoundParams& params,
                                    std::size_t max_len);

/// Per-step output distributions under teacher forcing (for diagnostics and
/// tests); row t is P(. | y_<t, context).
std::vector<Tensor> step_distributions(const DecoderContext& ctx,
                                       std::span<const std::uint32_t> target,
                                       const BoundParams& params);

}  // namespace dkg
