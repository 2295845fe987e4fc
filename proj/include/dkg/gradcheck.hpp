#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dkg/config.hpp"
#include "dkg/params.hpp"

namespace dkg {

/// Tiny random model + KG + example used to verify end-to-end gradients.
struct GradcheckConfig {
  std::size_t d = 16;
  std::size_t hops = 3;        // H
  std::size_t n_entities = 12;
  std::size_t n_relations = 5;  // including ToSelf
  std::size_t vocab = 30;
  std::size_t top_k = 3;
  std::size_t history_len = 8;
  std::size_t response_len = 1;
  double init_scale = 0.5;
  double h = 5e-4;
  double tolerance = 1e-4;
  Mode mode = Mode::full;
  double path_loss_weight = 1.0;

  void validate() const;
};

/// Keys: d H n_entities n_relations vocab top_k history_len response_len
/// init_scale h tolerance mode path_loss_weight.
void apply_config(GradcheckConfig& cfg, const ConfigMap& map);

struct BlockError {
  std::string name;
  std::size_t size = 0;
  double max_rel_err = 0.0;
};

struct GradcheckReport {
  std::vector<BlockError> blocks;  // every parameter block, then entity_tensor
  double max_rel_err = 0.0;
  bool passed(double tolerance) const { return max_rel_err < tolerance; }
};

GradcheckReport run_gradcheck(const GradcheckConfig& cfg, std::uint64_t seed);

}  // namespace dkg
