#include "dkg/encoder.hpp"

#include "dkg/error.hpp"

namespace dkg {

ad::Var encode_history(std::span<const std::uint32_t> tokens,
                       const BoundParams& params) {
  if (tokens.empty()) throw data_error("empty dialogue history");
  std::vector<std::int64_t> idx(tokens.begin(), tokens.end());
  ad::Var emb = ad::gather_rows(params[kTokenEmbedding], idx);
  ad::Var pooled = ad::mean_rows(emb);
  ad::Var pre = ad::add(ad::matmul(params[kEncoderW], pooled, true),
                        params[kEncoderB]);
  return ad::tanh(pre);
}

HeadOutputs predict_heads(ad::Var encoded, const BoundParams& params,
                          const ModelDims& dims, Mode mode,
                          bool operation_supervision) {
  if (encoded.size() != dims.hidden)
    throw data_error("predict_heads: encoding length " +
                     std::to_string(encoded.size()) + " != d " +
                     std::to_string(dims.hidden));
  if (mode == Mode::walk_only && operation_supervision)
    throw usage_error("operation supervision requested in walk-only mode");

  HeadOutputs out;
  const std::size_t n_r = dims.n_relations;
  ad::Var rel = ad::matmul(params[kRelationW], encoded, true);
  for (std::size_t h = 0; h < dims.hops; ++h) {
    ad::Var logits = ad::slice(rel, h * n_r, n_r);
    out.relation_logits.push_back(logits);
    out.relations.push_back(ad::softmax(logits));
  }
  if (mode == Mode::full) {
    out.operation = ad::matmul(params[kOperationW], encoded, true);
    ad::Var gate = ad::matmul(params[kGateW], encoded, true);
    for (std::size_t h = 0; h < dims.hops; ++h)
      out.gates.push_back(ad::softmax(ad::slice(gate, 2 * h, 2)));
  } else {
    for (std::size_t h = 0; h < dims.hops; ++h)
      out.gates.push_back(encoded.tape->constant(Tensor::vector({1.0, 0.0})));
  }
  return out;
}

}  // namespace dkg
