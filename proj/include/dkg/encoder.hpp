#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dkg/diffmath.hpp"
#include "dkg/params.hpp"

namespace dkg {

/// Outputs of the operation, relation and walk-or-check heads.
struct HeadOutputs {
  std::optional<ad::Var> operation;  // a, length d; absent in walk-only mode
  std::vector<ad::Var> relation_logits;  // H rows of length N_R
  std::vector<ad::Var> relations;        // softmax of each logit row
  std::vector<ad::Var> gates;            // H rows of length 2: (walk, check)
};

/// x~ = tanh(W^T meanpool(embedding[tokens]) + b). Throws on empty history.
ad::Var encode_history(std::span<const std::uint32_t> tokens,
                       const BoundParams& params);

/// a = W_o^T x~; per-hop softmax over W_r^T x~ and W_c^T x~.
///
/// Walk-only mode pins every gate to the constant (1, 0) and leaves `a`
/// unset; asking for operation supervision in that mode is an error.
HeadOutputs predict_heads(ad::Var encoded, const BoundParams& params,
                          const ModelDims& dims, Mode mode,
                          bool operation_supervision = false);

}  // namespace dkg
