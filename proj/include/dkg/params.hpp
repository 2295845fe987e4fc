#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dkg/diffmath.hpp"
#include "dkg/tensor.hpp"

namespace dkg {

enum class Mode { full, walk_only };

std::string to_string(Mode m);
Mode parse_mode(const std::string& s);

struct ModelDims {
  std::size_t vocab = 0;        // V
  std::size_t hidden = 0;       // d
  std::size_t n_entities = 0;   // N_E
  std::size_t n_relations = 0;  // N_R, including ToSelf
  std::size_t hops = 5;         // H
  std::size_t entity_tokens = 1;  // m

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Named parameter blocks in one contiguous buffer.
class ParamStore {
 public:
  struct Block {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;
    std::size_t size() const { return rows * cols; }
  };

  std::size_t add(std::string name, std::size_t rows, std::size_t cols);

  std::span<const Block> blocks() const noexcept { return blocks_; }
  const Block& block(std::size_t i) const { return blocks_.at(i); }
  std::size_t n_blocks() const noexcept { return blocks_.size(); }
  std::size_t total_size() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> view(std::size_t i) {
    return {data_.data() + blocks_[i].offset, blocks_[i].size()};
  }
  std::span<const double> view(std::size_t i) const {
    return {data_.data() + blocks_[i].offset, blocks_[i].size()};
  }
  Tensor tensor(std::size_t i) const;
  void set(std::size_t i, const Tensor& t);

 private:
  std::vector<Block> blocks_;
  std::vector<double> data_;
};

/// Block indices, in storage order.
enum ParamId : std::size_t {
  kTokenEmbedding,
  kEncoderW,
  kEncoderB,
  kOperationW,  // W_o
  kRelationW,   // W_r
  kGateW,       // W_c
  kDecInitW,
  kDecInitB,
  kAttKey,
  kAttQuery,
  kAttV,
  kGruW,
  kGruU,
  kGruUn,
  kGruB,
  kOutW,
  kOutB,
  kVocabW,
  kVocabB,
  kParamCount
};

/// All trainable parameters of the engine. Weights are stored input x output
/// and applied as W^T x.
struct ModelParams {
  ModelDims dims;
  ParamStore store;

  static ModelParams create(const ModelDims& dims);
  /// Weights uniform in [-0.08, 0.08]; biases zero.
  void init_uniform(std::mt19937_64& rng);
};

/// Per-tape leaf handles for every parameter block, indexed by ParamId.
struct BoundParams {
  std::vector<ad::Var> vars;
  ad::Var operator[](std::size_t id) const { return vars.at(id); }
};

BoundParams bind(ad::Tape& tape, const ModelParams& params, bool requires_grad);

}  // namespace dkg
