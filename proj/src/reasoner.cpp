#include "dkg/reasoner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "dkg/error.hpp"

namespace dkg {

void ReasonerConfig::validate(std::size_t n_entities) const {
  if (hops < 1) throw usage_error("H must be >= 1");
  if (!(eps > 0.0)) throw usage_error("eps must be > 0");
  if (top_k < 1 || top_k > n_entities)
    throw usage_error("top_k must be in [1, N_E=" + std::to_string(n_entities) +
                      "], got " + std::to_string(top_k));
}

namespace {

void check_dims(ad::Var e, ad::Var r, const ReifiedKG& kg, const char* op) {
  if (e.size() != kg.n_entities() || e.cols() != 1)
    throw data_error(std::string(op) + ": entity vector length " +
                     std::to_string(e.size()) + " != N_E " +
                     std::to_string(kg.n_entities()));
  if (r.size() != kg.n_relations() || r.cols() != 1)
    throw data_error(std::string(op) + ": relation vector length " +
                     std::to_string(r.size()) + " != N_R " +
                     std::to_string(kg.n_relations()));
}

}  // namespace

ad::Var follow_unnormalized(ad::Var e, ad::Var r, const ReifiedKG& kg) {
  check_dims(e, r, kg, "follow");
  ad::Var heads = ad::sp_apply(kg.m_h(), e);
  ad::Var rels = ad::sp_apply(kg.m_r(), r);
  return ad::sp_apply_transpose(kg.m_t(), ad::hadamard(heads, rels));
}

ad::Var next_hop(ad::Var e, ad::Var r, const ReifiedKG& kg, double eps) {
  check_dims(e, r, kg, "next_hop");
  if (!(eps > 0.0)) throw usage_error("next_hop: eps must be > 0");
  return ad::normalize_eps(follow_unnormalized(e, r, kg), eps);
}

ad::Var operation_scores(ad::Var a, ad::Var entity_tensor, std::size_t m) {
  if (m == 0 || entity_tensor.cols() % m != 0 ||
      entity_tensor.cols() / m != a.size())
    throw data_error("operate: entity tensor width does not match d*m");
  ad::Var pooled = ad::block_mean(entity_tensor, m);  // N_E x d
  return ad::matmul(pooled, a);                       // N_E x 1
}

ad::Var operate_with_scores(ad::Var e, ad::Var scores) {
  if (e.size() != scores.size())
    throw data_error("operate: entity vector length does not match N_E");
  return ad::softmax(ad::hadamard(scores, e));
}

ad::Var operate(ad::Var e, ad::Var a, ad::Var entity_tensor, std::size_t m) {
  if (e.size() != entity_tensor.rows())
    throw data_error("operate: entity vector length does not match N_E");
  return operate_with_scores(e, operation_scores(a, entity_tensor, m));
}

ad::Var combine(ad::Var gate, ad::Var walk, ad::Var check) {
  const Tensor& c = gate.value();
  if (c.size() != 2 || c[0] < 0.0 || c[1] < 0.0 ||
      std::abs(c[0] + c[1] - 1.0) > 1e-9)
    throw data_error("combine: gate is not a 2-way distribution");
  return ad::add(ad::scale_by(walk, ad::element(gate, 0)),
                 ad::scale_by(check, ad::element(gate, 1)));
}

Traversal traverse(ad::Var e1, const HeadOutputs& heads, const ReifiedKG& kg,
                   std::optional<ad::Var> entity_tensor, std::size_t m,
                   const ReasonerConfig& cfg, Mode mode) {
  if (heads.relations.size() != cfg.hops || heads.gates.size() != cfg.hops)
    throw usage_error("traverse: head outputs do not cover H hops");
  if (e1.size() != kg.n_entities())
    throw data_error("traverse: initial vector length != N_E");
  std::optional<ad::Var> scores;
  if (mode == Mode::full) {
    if (!entity_tensor || !heads.operation)
      throw usage_error("traverse: full mode needs the entity tensor and a");
    if (entity_tensor->rows() != kg.n_entities())
      throw data_error("traverse: entity tensor rows != N_E");
    scores = operation_scores(*heads.operation, *entity_tensor, m);
  }

  Traversal out;
  out.trace.initial = e1.value();
  ad::Var e = e1;
  for (std::size_t h = 0; h < cfg.hops; ++h) {
    ad::Var walk = next_hop(e, heads.relations[h], kg, cfg.eps);
    if (mode == Mode::full) {
      ad::Var check = operate_with_scores(e, *scores);
      e = combine(heads.gates[h], walk, check);
    } else {
      e = walk;
    }
    out.trace.hops.push_back(
        {e.value(), heads.relations[h].value(), heads.gates[h].value()});
  }
  out.entities = e;
  out.trace.final_entities = e.value();
  return out;
}

std::vector<std::uint32_t> top_k_indices(std::span<const double> values,
                                         std::size_t k) {
  std::vector<std::uint32_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0u);
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k),
                    idx.end(), [&](std::uint32_t a, std::uint32_t b) {
                      if (values[a] != values[b]) return values[a] > values[b];
                      return a < b;
                    });
  idx.resize(k);
  return idx;
}

Retrieved top_k_entities(ad::Var entities, ad::Var entity_tensor, std::size_t k) {
  const Tensor& e = entities.value();
  if (k < 1 || k > e.size())
    throw usage_error("top_k: k=" + std::to_string(k) + " outside [1, " +
                      std::to_string(e.size()) + "]");
  if (entity_tensor.rows() != e.size())
    throw data_error("top_k: entity tensor rows != N_E");
  Retrieved r;
  r.ids = top_k_indices(e.data, k);
  std::vector<std::int64_t> rows(r.ids.begin(), r.ids.end());
  std::vector<std::size_t> pick(r.ids.begin(), r.ids.end());
  for (auto id : r.ids) r.weights.push_back(e[id]);
  r.blocks = ad::scale_rows(ad::gather_rows(entity_tensor, rows),
                            ad::gather(entities, pick));
  return r;
}

std::vector<std::uint32_t> strip_trailing(std::vector<std::uint32_t> path,
                                          std::uint32_t to_self) {
  while (!path.empty() && path.back() == to_self) path.pop_back();
  return path;
}

std::vector<RankedPath> extract_paths(const HopTrace& trace, const ReifiedKG& kg,
                                      std::uint32_t to_self,
                                      std::size_t beam_width) {
  if (beam_width < 1) throw usage_error("beam width must be >= 1");
  struct Beam {
    std::vector<std::uint32_t> rels;
    double score;
    std::vector<std::uint32_t> frontier;
  };
  std::vector<Beam> beams(1);
  beams[0].score = 1.0;
  for (std::uint32_t i = 0; i < trace.initial.size(); ++i)
    if (trace.initial[i] > 0.0) beams[0].frontier.push_back(i);
  if (beams[0].frontier.empty()) return {};

  auto better = [](const Beam& a, const Beam& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.rels < b.rels;
  };

  for (const auto& hop : trace.hops) {
    std::vector<Beam> next;
    for (const auto& b : beams) {
      std::map<std::uint32_t, std::vector<std::uint32_t>> by_rel;
      for (auto ent : b.frontier)
        for (auto row : kg.outgoing(ent)) {
          const Triple t = kg.triple(row);
          by_rel[t.relation].push_back(t.tail);
        }
      for (auto& [rel, tails] : by_rel) {
        std::sort(tails.begin(), tails.end());
        tails.erase(std::unique(tails.begin(), tails.end()), tails.end());
        Beam nb{b.rels, b.score * hop.relations[rel], std::move(tails)};
        nb.rels.push_back(rel);
        next.push_back(std::move(nb));
      }
    }
    std::sort(next.begin(), next.end(), better);
    if (next.size() > beam_width) next.resize(beam_width);
    beams = std::move(next);
  }

  std::vector<RankedPath> out;
  out.reserve(beams.size());
  for (auto& b : beams) out.push_back({strip_trailing(b.rels, to_self), b.score});
  return out;
}

namespace {

std::string fmt_prob(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", p);
  return buf;
}

std::string top3(const Tensor& values, const Vocab& vocab) {
  std::string s;
  for (auto i : top_k_indices(values.data, 3)) {
    if (!s.empty()) s += " | ";
    s += vocab.name(i) + " " + fmt_prob(values[i]);
  }
  return s;
}

}  // namespace

std::string format_trace(const HopTrace& trace, const Vocabs& vocabs, Mode mode) {
  std::string out;
  for (std::size_t h = 0; h < trace.hops.size(); ++h) {
    const auto& hop = trace.hops[h];
    out += "hop " + std::to_string(h + 1);
    out += "\trel: " + top3(hop.relations, vocabs.relations);
    out += "\tent: " + top3(hop.entities, vocabs.entities);
    if (mode == Mode::full) out += "\tgate: walk " + fmt_prob(hop.gate[0]);
    out += '\n';
  }
  return out;
}

}  // namespace dkg
