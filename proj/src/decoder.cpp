#include "dkg/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "dkg/error.hpp"
#include "dkg/tokenizer.hpp"

namespace dkg {

DecoderContext build_context(std::span<const std::uint32_t> history,
                             ad::Var entity_blocks, std::size_t m,
                             const BoundParams& params) {
  if (history.empty()) throw data_error("decoder context: empty history");
  ad::Var table = params[kTokenEmbedding];
  const std::size_t d = table.cols();
  std::vector<std::int64_t> idx(history.begin(), history.end());
  ad::Var hist = ad::gather_rows(table, idx);
  if (entity_blocks.cols() != m * d)
    throw data_error("decoder context: entity block width != m*d");
  const std::size_t ent_rows = entity_blocks.rows() * m;
  DecoderContext ctx;
  ctx.history_len = history.size();
  ctx.entity_rows = ent_rows;
  if (ent_rows == 0) {
    ctx.rows = hist;
  } else {
    ad::Var parts[] = {hist, ad::reshape(entity_blocks, ent_rows, d)};
    ctx.rows = ad::vconcat(parts);
  }
  return ctx;
}

namespace {

// Single-layer GRU with additive attention over the context rows.
class Recurrence {
 public:
  Recurrence(const DecoderContext& ctx, const BoundParams& p) : p_(p) {
    rows_ = ctx.rows;
    d_ = rows_.cols();
    keys_ = ad::matmul(rows_, p[kAttKey]);
    state_ = ad::tanh(ad::add(
        ad::matmul(p[kDecInitW], ad::mean_rows(rows_), true), p[kDecInitB]));
  }

  // Consumes the previous token, returns logits over the vocabulary.
  ad::Var step(std::uint32_t prev) {
    const std::size_t d = d_;
    ad::Var q = ad::matmul(p_[kAttQuery], state_, true);
    ad::Var pre = ad::tanh(ad::add_row_broadcast(keys_, q));
    ad::Var alpha = ad::softmax(ad::matmul(pre, p_[kAttV]));
    ad::Var ctx = ad::matmul(rows_, alpha, true);

    const std::int64_t tok[] = {static_cast<std::int64_t>(prev)};
    ad::Var x = ad::reshape(ad::gather_rows(p_[kTokenEmbedding], tok), d, 1);
    ad::Var xu[] = {x, ctx};
    ad::Var u = ad::concat(xu);
    ad::Var gu = ad::add(ad::matmul(p_[kGruW], u, true), p_[kGruB]);  // 3d
    ad::Var gs = ad::matmul(p_[kGruU], state_, true);                // 2d
    ad::Var z = ad::sigmoid(ad::add(ad::slice(gu, 0, d), ad::slice(gs, 0, d)));
    ad::Var r = ad::sigmoid(ad::add(ad::slice(gu, d, d), ad::slice(gs, d, d)));
    ad::Var n = ad::tanh(ad::add(
        ad::slice(gu, 2 * d, d),
        ad::matmul(p_[kGruUn], ad::hadamard(r, state_), true)));
    // s' = (1 - z) n + z s
    state_ = ad::add(n, ad::hadamard(z, ad::sub(state_, n)));

    ad::Var so[] = {state_, ctx};
    ad::Var o = ad::tanh(ad::add(ad::matmul(p_[kOutW], ad::concat(so), true),
                                 p_[kOutB]));
    ad::Var logits = ad::add(ad::matmul(p_[kVocabW], o, true),
                             ad::matmul(p_[kTokenEmbedding], o));
    return ad::add(logits, p_[kVocabB]);
  }

 private:
  const BoundParams& p_;
  ad::Var rows_, keys_, state_;
  std::size_t d_ = 0;
};

void check_target(std::span<const std::uint32_t> target, std::size_t vocab) {
  if (target.empty() || target.back() != TokenVocab::kEos)
    throw data_error("decode target must be nonempty and end with EOS");
  for (auto t : target)
    if (t >= vocab) throw data_error("decode target token out of vocabulary");
}

}  // namespace

ad::Var decode_loss(const DecoderContext& ctx,
                    std::span<const std::uint32_t> target,
                    const BoundParams& params) {
  check_target(target, params[kVocabB].size());
  Recurrence rec(ctx, params);
  std::vector<ad::Var> terms;
  std::uint32_t prev = TokenVocab::kBos;
  for (auto y : target) {
    terms.push_back(ad::cross_entropy(rec.step(prev), y));
    prev = y;
  }
  return ad::sum(ad::concat(terms));
}

std::vector<Tensor> step_distributions(const DecoderContext& ctx,
                                       std::span<const std::uint32_t> target,
                                       const BoundParams& params) {
  check_target(target, params[kVocabB].size());
  Recurrence rec(ctx, params);
  std::vector<Tensor> out;
  std::uint32_t prev = TokenVocab::kBos;
  for (auto y : target) {
    out.push_back(ad::softmax(rec.step(prev)).value());
    prev = y;
  }
  return out;
}

std::vector<std::uint32_t> generate(const DecoderContext& ctx,
                                    const BoundParams& params,
                                    std::size_t max_len) {
  if (max_len < 1) throw usage_error("generate: max_len must be >= 1");
  Recurrence rec(ctx, params);
  std::vector<std::uint32_t> out;
  std::uint32_t prev = TokenVocab::kBos;
  for (std::size_t t = 0; t < max_len; ++t) {
    const Tensor& logits = rec.step(prev).value();
    const auto best = static_cast<std::uint32_t>(
        std::max_element(logits.data.begin(), logits.data.end()) -
        logits.data.begin());  // first maximum = lowest index
    if (best == TokenVocab::kEos) break;
    out.push_back(best);
    prev = best;
  }
  return out;
}

}  // namespace dkg
