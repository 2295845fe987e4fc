#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "dkg/error.hpp"
#include "dkg/reasoner.hpp"
#include "dkg/rng.hpp"
#include "oracles.hpp"

using namespace dkg;
using oracle::Vec;

namespace {

double norm(const Tensor& t) { return l2_norm(t.data); }

// Heads with fixed relation distributions and gates, as tape constants.
HeadOutputs fixed_heads(ad::Tape& tape, const std::vector<Vec>& rels,
                        const std::vector<Vec>& gates, const Vec* a) {
  HeadOutputs h;
  for (const auto& r : rels) {
    h.relations.push_back(tape.constant(Tensor::vector(r)));
    h.relation_logits.push_back(h.relations.back());
  }
  for (const auto& g : gates) h.gates.push_back(tape.constant(Tensor::vector(g)));
  if (a) h.operation = tape.constant(Tensor::vector(*a));
  return h;
}

Vec onehot(std::size_t n, std::size_t i) {
  Vec v(n, 0.0);
  v[i] = 1.0;
  return v;
}

ReifiedKG chain(std::size_t n) {
  std::vector<Triple> t;
  for (std::uint32_t i = 0; i + 1 < n; ++i) t.push_back({i, 0, i + 1});
  return reify(t, n, 2);
}

}  // namespace

TEST(Reasoner, NextHopSingleTriple) {
  auto kg = build_knowledge_graph(std::vector<StringTriple>{{"A", "r", "B"}});
  ad::Tape tape;
  auto e = tape.constant(Tensor::vector({1, 0}));
  auto r = tape.constant(Tensor::vector({1, 0}));
  auto out = next_hop(e, r, kg.reified, 1e-12).value();
  EXPECT_EQ(out[0], 0.0);
  EXPECT_NEAR(out[1], 1.0 / (1.0 + 1e-12), 1e-15);
}

TEST(Reasoner, ToSelfKeepsDirection) {
  std::mt19937_64 rng(4);
  auto kg = build_knowledge_graph(oracle::random_triples(rng, 9, 3, 20));
  ad::Tape tape;
  Vec ev = oracle::random_distribution(rng, 9);
  auto out = next_hop(tape.constant(Tensor::vector(ev)),
                      tape.constant(Tensor::vector(onehot(4, kg.to_self()))), kg.reified,
                      1e-12).value();
  double dot = 0, ne = 0;
  for (int i = 0; i < 9; ++i) {
    dot += out[i] * ev[i];
    ne += ev[i] * ev[i];
  }
  EXPECT_NEAR(dot / (norm(out) * std::sqrt(ne)), 1.0, 1e-9);
}

TEST(Reasoner, FollowDecaysNextDoesNot) {
  const auto kg = chain(6);
  ad::Tape tape;
  auto r = tape.constant(Tensor::vector({0.5, 0.5}));
  auto f = tape.constant(Tensor::vector(onehot(6, 0)));
  auto n = f;
  for (int h = 1; h <= 5; ++h) {
    f = follow_unnormalized(f, r, kg);
    n = next_hop(n, r, kg, 1e-12);
    EXPECT_NEAR(norm(f.value()), std::pow(0.5, h), 1e-12);
    EXPECT_GT(norm(n.value()), 0.999999);
    EXPECT_LT(norm(n.value()), 1.0);
  }
}

TEST(Reasoner, FollowEqualsNextAtUnitWeight) {
  const auto kg = chain(4);
  ad::Tape tape;
  auto r = tape.constant(Tensor::vector({1.0, 0.0}));
  auto e = tape.constant(Tensor::vector(onehot(4, 1)));
  auto f = follow_unnormalized(e, r, kg).value();
  auto n = next_hop(e, r, kg, 1e-12).value();
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(n[i], f[i] / (1.0 + 1e-12), 1e-15);
}

TEST(Reasoner, NextHopMatchesDenseOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t ne = 2 + rng() % 20, nr = 1 + rng() % 5;
    auto kg = build_knowledge_graph(oracle::random_triples(rng, ne, nr, ne + rng() % 40));
    const auto triples = kg.reified.triples();
    Vec e = oracle::random_distribution(rng, ne);
    Vec r = oracle::random_distribution(rng, kg.reified.n_relations());
    ad::Tape tape;
    auto out = next_hop(tape.constant(Tensor::vector(e)), tape.constant(Tensor::vector(r)),
                        kg.reified, 1e-12).value();
    Vec expect = oracle::dense_next(triples, ne, e, r, 1e-12);
    for (std::size_t i = 0; i < ne; ++i) EXPECT_NEAR(out[i], expect[i], 1e-12);
  }
}

TEST(Reasoner, DimensionMismatch) {
  const auto kg = chain(4);
  ad::Tape tape;
  EXPECT_THROW(next_hop(tape.constant(Tensor(3, 1)), tape.constant(Tensor(2, 1)), kg, 1e-12),
               Error);
  EXPECT_THROW(next_hop(tape.constant(Tensor(4, 1)), tape.constant(Tensor(3, 1)), kg, 1e-12),
               Error);
}

TEST(Reasoner, OperateMatchesOracle) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  const std::size_t ne = 7, d = 4, m = 3;
  Tensor E(ne, m * d);
  for (auto& x : E.data) x = u(rng);
  Vec a(d), e = oracle::random_distribution(rng, ne);
  for (auto& x : a) x = u(rng);
  ad::Tape tape;
  auto out = operate(tape.constant(Tensor::vector(e)), tape.constant(Tensor::vector(a)),
                     tape.constant(E), m).value();
  Vec expect = oracle::dense_operate(e, a, oracle::unpack(E, m));
  for (std::size_t i = 0; i < ne; ++i) EXPECT_NEAR(out[i], expect[i], 1e-14);
}

TEST(Reasoner, OperateDegenerateInputsAreUniform) {
  std::mt19937_64 rng(9);
  Tensor E(5, 6);
  for (auto& x : E.data) x = static_cast<double>(rng() % 5);
  ad::Tape tape;
  auto zero_a = operate(tape.constant(Tensor::vector(oracle::random_distribution(rng, 5))),
                        tape.constant(Tensor(3, 1)), tape.constant(E), 2).value();
  auto zero_e = operate(tape.constant(Tensor(5, 1)), tape.constant(Tensor(3, 1, 1.0)),
                        tape.constant(E), 2).value();
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(zero_a[i], 0.2, 1e-15);
    EXPECT_NEAR(zero_e[i], 0.2, 1e-15);
  }
}

TEST(Reasoner, CombineExamples) {
  ad::Tape tape;
  auto w = tape.constant(Tensor::vector({1, 0, 3}));
  auto c = tape.constant(Tensor::vector({0, 2, 1}));
  EXPECT_EQ(combine(tape.constant(Tensor::vector({1, 0})), w, c).value().data, w.value().data);
  EXPECT_EQ(combine(tape.constant(Tensor::vector({0, 1})), w, c).value().data, c.value().data);
  EXPECT_EQ(combine(tape.constant(Tensor::vector({0.5, 0.5})), w, c).value().data,
            (std::vector<double>{0.5, 1.0, 2.0}));
  EXPECT_THROW(combine(tape.constant(Tensor::vector({0.7, 0.7})), w, c), Error);
  EXPECT_THROW(combine(tape.constant(Tensor::vector({1.5, -0.5})), w, c), Error);
}

TEST(Reasoner, TraverseOneHopIsNextHop) {
  auto kg = build_knowledge_graph(std::vector<StringTriple>{{"A", "r", "B"}});
  ad::Tape tape;
  ReasonerConfig cfg{1, 1e-12, 1};
  auto heads = fixed_heads(tape, {{0.7, 0.3}}, {{1, 0}}, nullptr);
  auto e1 = tape.constant(Tensor::vector({1, 0}));
  auto t = traverse(e1, heads, kg.reified, std::nullopt, 1, cfg, Mode::walk_only);
  auto n = next_hop(e1, heads.relations[0], kg.reified, 1e-12);
  EXPECT_EQ(t.entities.value().data, n.value().data);
  ASSERT_EQ(t.trace.hops.size(), 1u);
  EXPECT_EQ(t.trace.final_entities.data, n.value().data);
}

TEST(Reasoner, TwoHopChainReachesTail) {
  auto kg = build_knowledge_graph(
      std::vector<StringTriple>{{"A", "r1", "B"}, {"B", "r2", "C"}});
  const std::size_t nr = kg.reified.n_relations();
  const auto ts = kg.to_self();
  std::vector<Vec> rels{onehot(nr, 0), onehot(nr, 1), onehot(nr, ts), onehot(nr, ts)};
  std::vector<Vec> gates(4, Vec{1, 0});
  ad::Tape tape;
  auto heads = fixed_heads(tape, rels, gates, nullptr);
  ReasonerConfig cfg{4, 1e-12, 1};
  auto t = traverse(tape.constant(Tensor::vector({1, 0, 0})), heads, kg.reified, std::nullopt,
                    1, cfg, Mode::walk_only);
  EXPECT_EQ(top_k_indices(t.entities.value().data, 1)[0], kg.vocabs.entities.at("C"));
  Vec dense = oracle::dense_traverse(kg.reified.triples(), 3, {1, 0, 0}, rels, nullptr,
                                     nullptr, nullptr, 1e-12);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(t.entities.value()[i], dense[i], 1e-12);
}

TEST(Reasoner, TraverseMatchesDenseOracleFullMode) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t ne = 2 + rng() % 30, nr = 1 + rng() % 5, m = 1 + rng() % 3, d = 3,
                      hops = 1 + rng() % 5;
    auto kg = build_knowledge_graph(oracle::random_triples(rng, ne, nr, ne + rng() % 60));
    const std::size_t n_rel = kg.reified.n_relations();
    std::vector<Vec> rels, gates;
    for (std::size_t h = 0; h < hops; ++h) {
      rels.push_back(oracle::random_distribution(rng, n_rel));
      gates.push_back(oracle::random_distribution(rng, 2));
    }
    Vec a(d);
    for (auto& x : a) x = u(rng);
    Tensor E(ne, m * d);
    for (auto& x : E.data) x = u(rng);
    Vec e1(ne, 0.0);
    e1[rng() % ne] = 1.0;
    ad::Tape tape;
    auto heads = fixed_heads(tape, rels, gates, &a);
    ReasonerConfig cfg{hops, 1e-12, 1};
    auto t = traverse(tape.constant(Tensor::vector(e1)), heads, kg.reified, tape.constant(E), m,
                      cfg, Mode::full);
    auto E3 = oracle::unpack(E, m);
    Vec dense = oracle::dense_traverse(kg.reified.triples(), ne, e1, rels, &gates, &a, &E3,
                                       1e-12);
    for (std::size_t i = 0; i < ne; ++i) {
      EXPECT_NEAR(t.entities.value()[i], dense[i], 1e-9);
      EXPECT_GE(t.entities.value()[i], 0.0);
    }
  }
}

TEST(Reasoner, TraverseInvariantUnderTriplePermutation) {
  std::mt19937_64 rng(41);
  auto kg = build_knowledge_graph(oracle::random_triples(rng, 20, 4, 70));
  std::vector<std::uint32_t> perm(kg.reified.n_triples());
  std::iota(perm.begin(), perm.end(), 0u);
  shuffle_range(perm.begin(), perm.end(), rng);
  const auto shuffled = permute_triples(kg.reified, perm);
  std::vector<Vec> rels, gates(5, Vec{1, 0});
  for (int h = 0; h < 5; ++h) rels.push_back(oracle::random_distribution(rng, 5));
  Vec e1(20, 0.0);
  e1[3] = e1[7] = 1.0;
  ad::Tape tape;
  auto heads = fixed_heads(tape, rels, gates, nullptr);
  ReasonerConfig cfg{5, 1e-12, 1};
  auto a = traverse(tape.constant(Tensor::vector(e1)), heads, kg.reified, std::nullopt, 1, cfg,
                    Mode::walk_only);
  auto b = traverse(tape.constant(Tensor::vector(e1)), heads, shuffled, std::nullopt, 1, cfg,
                    Mode::walk_only);
  for (int i = 0; i < 20; ++i) EXPECT_NEAR(a.entities.value()[i], b.entities.value()[i], 1e-9);
}

TEST(Reasoner, TraverseConfigErrors) {
  const auto kg = chain(3);
  ad::Tape tape;
  auto heads = fixed_heads(tape, {{1, 0}}, {{0.5, 0.5}}, nullptr);
  ReasonerConfig two{2, 1e-12, 1}, one{1, 1e-12, 1};
  auto e1 = tape.constant(Tensor::vector({1, 0, 0}));
  EXPECT_THROW(traverse(e1, heads, kg, std::nullopt, 1, two, Mode::walk_only), Error);
  EXPECT_THROW(traverse(e1, heads, kg, std::nullopt, 1, one, Mode::full), Error);
  EXPECT_THROW(ReasonerConfig({1, 1e-12, 4}).validate(3), Error);
  EXPECT_THROW(ReasonerConfig({0, 1e-12, 1}).validate(3), Error);
}

TEST(Reasoner, TopKExamples) {
  ad::Tape tape;
  Tensor E(3, 2);
  E.data = {1, 2, 3, 4, 5, 6};
  auto ent = tape.constant(E);
  auto r = top_k_entities(tape.constant(Tensor::vector({0, 1, 0})), ent, 1);
  EXPECT_EQ(r.ids, (std::vector<std::uint32_t>{1}));
  EXPECT_EQ(r.weights, (std::vector<double>{1.0}));
  EXPECT_EQ(r.blocks.value().data, (std::vector<double>{3, 4}));
  auto u = top_k_entities(tape.constant(Tensor(3, 1, 1.0 / 3.0)), ent, 2);
  EXPECT_EQ(u.ids, (std::vector<std::uint32_t>{0, 1}));
  EXPECT_THROW(top_k_entities(tape.constant(Tensor(3, 1)), ent, 0), Error);
  EXPECT_THROW(top_k_entities(tape.constant(Tensor(3, 1)), ent, 4), Error);
}

TEST(Reasoner, TopKMatchesFullSort) {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(1 + rng() % 30);
    for (auto& x : v) x = static_cast<double>(rng() % 6);  // plenty of ties
    const std::size_t k = 1 + rng() % v.size();
    std::vector<std::pair<double, int>> sorted;
    for (std::size_t i = 0; i < v.size(); ++i) sorted.push_back({-v[i], static_cast<int>(i)});
    std::sort(sorted.begin(), sorted.end());
    auto got = top_k_indices(v, k);
    ASSERT_EQ(got.size(), k);
    for (std::size_t i = 0; i < k; ++i) EXPECT_EQ(got[i], static_cast<std::uint32_t>(sorted[i].second));
  }
}

TEST(Reasoner, ExtractPathsSingleTriple) {
  auto kg = build_knowledge_graph(std::vector<StringTriple>{{"A", "r", "B"}});
  HopTrace trace;
  trace.initial = Tensor::vector({1, 0});
  trace.hops.push_back({Tensor::vector({0, 1}), Tensor::vector({0.9, 0.1}), Tensor::vector({1, 0})});
  auto paths = extract_paths(trace, kg.reified, kg.to_self(), 5);
  ASSERT_FALSE(paths.empty());
  EXPECT_EQ(paths[0].relations, (std::vector<std::uint32_t>{0}));
  EXPECT_DOUBLE_EQ(paths[0].score, 0.9);
  trace.initial = Tensor::vector({0, 0});
  EXPECT_TRUE(extract_paths(trace, kg.reified, kg.to_self(), 5).empty());
}

TEST(Reasoner, ExtractPathsMatchesBruteForce) {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t ne = 5, hops = 1 + rng() % 3;
    auto kg = build_knowledge_graph(oracle::random_triples(rng, ne, 3, 5 + rng() % 8));
    const std::size_t nr = kg.reified.n_relations();
    HopTrace trace;
    trace.initial = Tensor(ne, 1);
    trace.initial[rng() % ne] = 1.0;
    std::vector<Vec> rels;
    for (std::size_t h = 0; h < hops; ++h) {
      rels.push_back(oracle::random_distribution(rng, nr));
      trace.hops.push_back({Tensor(ne, 1), Tensor::vector(rels.back()), Tensor::vector({1, 0})});
    }
    std::vector<std::uint32_t> start;
    for (std::uint32_t i = 0; i < ne; ++i)
      if (trace.initial[i] > 0) start.push_back(i);
    auto expect = oracle::brute_force_paths(kg.reified.triples(), start, rels, kg.to_self());
    auto got = extract_paths(trace, kg.reified, kg.to_self(), 100000);
    ASSERT_EQ(got.size(), expect.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].relations, expect[i].rels);
      EXPECT_EQ(got[i].score, expect[i].score);
    }
    // A narrower beam keeps a prefix of the exhaustive ranking at hop 1.
    if (hops == 1) {
      auto narrow = extract_paths(trace, kg.reified, kg.to_self(), 2);
      for (std::size_t i = 0; i < narrow.size(); ++i) EXPECT_EQ(narrow[i].relations, expect[i].rels);
    }
  }
}

TEST(Reasoner, StripTrailing) {
  EXPECT_EQ(strip_trailing({1, 4, 4}, 4), (std::vector<std::uint32_t>{1}));
  EXPECT_EQ(strip_trailing({4, 1, 4}, 4), (std::vector<std::uint32_t>{4, 1}));
  EXPECT_TRUE(strip_trailing({4, 4}, 4).empty());
}

TEST(Reasoner, FormatTrace) {
  auto kg = build_knowledge_graph(std::vector<StringTriple>{{"A", "r", "B"}});
  HopTrace trace;
  trace.initial = Tensor::vector({1, 0});
  trace.hops.push_back({Tensor::vector({0, 1}), Tensor::vector({0.9, 0.1}), Tensor::vector({0.8, 0.2})});
  const auto full = format_trace(trace, kg.vocabs, Mode::full);
  const auto walk = format_trace(trace, kg.vocabs, Mode::walk_only);
  EXPECT_NE(full.find("hop 1"), std::string::npos);
  EXPECT_NE(full.find("r 0.9000"), std::string::npos);
  EXPECT_NE(full.find("gate"), std::string::npos);
  EXPECT_EQ(walk.find("gate"), std::string::npos);
}
