#include "dkg/params.hpp"

#include <algorithm>

#include "dkg/error.hpp"
#include "dkg/rng.hpp"

namespace dkg {

std::string to_string(Mode m) { return m == Mode::full ? "full" : "walk-only"; }

Mode parse_mode(const std::string& s) {
  if (s == "full") return Mode::full;
  if (s == "walk-only" || s == "walk_only") return Mode::walk_only;
  throw usage_error("unknown mode '" + s + "' (expected full | walk-only)");
}

std::size_t ParamStore::add(std::string name, std::size_t rows, std::size_t cols) {
  blocks_.push_back({std::move(name), rows, cols, data_.size()});
  data_.resize(data_.size() + rows * cols, 0.0);
  return blocks_.size() - 1;
}

Tensor ParamStore::tensor(std::size_t i) const {
  const auto v = view(i);
  return Tensor(blocks_[i].rows, blocks_[i].cols,
                std::vector<double>(v.begin(), v.end()));
}

void ParamStore::set(std::size_t i, const Tensor& t) {
  if (t.rows != blocks_.at(i).rows || t.cols != blocks_[i].cols)
    throw usage_error("ParamStore::set: shape mismatch for " + blocks_[i].name);
  std::copy(t.data.begin(), t.data.end(), view(i).begin());
}

ModelParams ModelParams::create(const ModelDims& dims) {
  if (dims.hidden == 0 || dims.hops == 0 || dims.vocab == 0 ||
      dims.n_relations == 0 || dims.n_entities == 0 || dims.entity_tokens == 0)
    throw usage_error("model dimensions must be positive");
  ModelParams p;
  p.dims = dims;
  const std::size_t d = dims.hidden;
  auto& s = p.store;
  s.add("token_embedding", dims.vocab, d);
  s.add("encoder_w", d, d);
  s.add("encoder_b", d, 1);
  s.add("operation_w", d, d);
  s.add("relation_w", d, dims.n_relations * dims.hops);
  s.add("gate_w", d, 2 * dims.hops);
  s.add("dec_init_w", d, d);
  s.add("dec_init_b", d, 1);
  s.add("att_key", d, d);
  s.add("att_query", d, d);
  s.add("att_v", d, 1);
  s.add("gru_w", 2 * d, 3 * d);
  s.add("gru_u", d, 2 * d);
  s.add("gru_un", d, d);
  s.add("gru_b", 3 * d, 1);
  s.add("out_w", 2 * d, d);
  s.add("out_b", d, 1);
  s.add("vocab_w", d, dims.vocab);
  s.add("vocab_b", dims.vocab, 1);
  return p;
}

void ModelParams::init_uniform(std::mt19937_64& rng) {
  for (std::size_t i = 0; i < store.n_blocks(); ++i) {
    const bool bias = store.block(i).cols == 1 && i != kAttV;
    for (double& x : store.view(i)) x = bias ? 0.0 : -0.08 + 0.16 * uniform_unit(rng);
  }
}

BoundParams bind(ad::Tape& tape, const ModelParams& params, bool requires_grad) {
  BoundParams b;
  b.vars.reserve(params.store.n_blocks());
  for (std::size_t i = 0; i < params.store.n_blocks(); ++i)
    b.vars.push_back(tape.leaf(params.store.tensor(i), requires_grad));
  return b;
}

}  // namespace dkg
