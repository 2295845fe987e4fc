#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dkg/error.hpp"
#include "dkg/metrics.hpp"
#include "dkg/rng.hpp"
#include "dkg/tokenizer.hpp"

using namespace dkg;

namespace {

Tokens T(const std::string& s) { return tokenize(s); }

RankedPath P(std::vector<std::uint32_t> r) { return {std::move(r), 0.0}; }

}  // namespace

TEST(Metrics, ExactMatchIsOrderFree) {
  EXPECT_EQ(exact_match(T("inform B A"), T("inform A B")), 1);
  EXPECT_EQ(exact_match(T("inform A"), T("inform A")), 1);
  EXPECT_EQ(exact_match(T("inform A"), T("inform A B")), 0);
  EXPECT_EQ(exact_match(T("a a b"), T("a b b")), 0);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    Tokens pred;
    for (int i = 0; i < 1 + static_cast<int>(rng() % 8); ++i) pred.push_back("w" + std::to_string(rng() % 4));
    Tokens gold = pred, perm = pred;
    shuffle_range(perm.begin(), perm.end(), rng);
    EXPECT_EQ(exact_match(perm, gold), 1);
  }
}

TEST(Metrics, TokenF1) {
  EXPECT_DOUBLE_EQ(token_f1(T("a b"), T("a b")), 1.0);
  EXPECT_DOUBLE_EQ(token_f1(T("a b"), T("c d")), 0.0);
  EXPECT_DOUBLE_EQ(token_f1(T("a b"), T("b c")), 0.5);
  EXPECT_DOUBLE_EQ(token_f1({}, {}), 1.0);
  EXPECT_DOUBLE_EQ(token_f1({}, T("a")), 0.0);
  EXPECT_DOUBLE_EQ(token_f1(T("a"), {}), 0.0);
  // P = 1/3, R = 1/2
  EXPECT_NEAR(token_f1(T("a x y"), T("a z")), 2.0 * (1.0 / 3) * 0.5 / (1.0 / 3 + 0.5), 1e-15);
}

TEST(Metrics, F1Symmetric) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    Tokens a, b;
    for (int i = 0; i < static_cast<int>(rng() % 6); ++i) a.push_back("w" + std::to_string(rng() % 5));
    for (int i = 0; i < static_cast<int>(rng() % 6); ++i) b.push_back("w" + std::to_string(rng() % 5));
    EXPECT_DOUBLE_EQ(token_f1(a, b), token_f1(b, a));
    const double f = token_f1(a, b);
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
  }
}

TEST(Metrics, EntityF1) {
  Vocab ents;
  ents.add("Chevron");
  ents.add("gas station");
  ents.add("5 miles");
  ents.add("gas");
  EntityMatcher m(ents);
  EXPECT_EQ(m.mentions(T("the gas station is chevron")),
            (std::vector<std::uint32_t>{1, 0}));
  EXPECT_DOUBLE_EQ(entity_f1(T("chevron is near"), T("go to Chevron"), m), 1.0);
  EXPECT_NEAR(entity_f1(T("chevron"), T("chevron is 5 miles away"), m), 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(entity_f1(T("hello"), T("hi there"), m), 1.0);
  EXPECT_DOUBLE_EQ(entity_f1(T("chevron"), T("hi there"), m), 0.0);
}

TEST(Metrics, BleuHandExample) {
  std::vector<Tokens> preds{T("the cat sat on the mat"), T("a dog")};
  std::vector<Tokens> golds{T("the cat is on the mat"), T("a big dog barked")};
  // unigrams 7/8, bigrams 3/6, c = 8, r = 10
  const double bp = std::exp(1.0 - 10.0 / 8.0);
  EXPECT_NEAR(corpus_bleu(preds, golds, 1), bp * 7.0 / 8.0, 1e-12);
  EXPECT_NEAR(corpus_bleu(preds, golds, 2), bp * std::sqrt(7.0 / 8.0 * 3.0 / 6.0), 1e-12);
  // trigrams: "on the mat" only (1/4); 4-grams: none -> 0
  EXPECT_NEAR(corpus_bleu(preds, golds, 3), bp * std::cbrt(7.0 / 8.0 * 3.0 / 6.0 * 1.0 / 4.0),
              1e-12);
  EXPECT_EQ(corpus_bleu(preds, golds, 4), 0.0);
}

TEST(Metrics, BleuIdentityDisjointAsymmetry) {
  std::vector<Tokens> corpus{T("inform the cat sat on the mat"), T("hello there friend , ok"),
                             T("a b c d e")};
  EXPECT_DOUBLE_EQ(corpus_bleu(corpus, corpus, 4), 1.0);
  std::vector<Tokens> other{T("x y z"), T("p q"), T("r")};
  EXPECT_DOUBLE_EQ(corpus_bleu(other, corpus, 4), 0.0);
  std::vector<Tokens> a{T("the cat")}, b{T("the cat sat down")};
  EXPECT_NE(corpus_bleu(a, b, 2), corpus_bleu(b, a, 2));
  EXPECT_THROW(corpus_bleu(a, corpus, 4), Error);
}

TEST(Metrics, PathAtK) {
  std::vector<RankedPath> ranked{P({1}), P({2, 0}), P({0, 1}), P({3})};
  const std::vector<std::uint32_t> top{1}, third{0, 1}, missing{4};
  EXPECT_EQ(path_at_k(ranked, top, 1), 1);
  EXPECT_EQ(path_at_k(ranked, third, 1), 0);
  EXPECT_EQ(path_at_k(ranked, third, 3), 1);
  EXPECT_EQ(path_at_k(ranked, third, 5), 1);
  EXPECT_EQ(path_at_k(ranked, missing, 10), 0);
  EXPECT_THROW(path_at_k(ranked, top, 0), Error);
}

TEST(Metrics, PathAtKMonotone) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<RankedPath> ranked;
    for (int i = 0; i < static_cast<int>(rng() % 8); ++i)
      ranked.push_back(P({static_cast<std::uint32_t>(rng() % 3), static_cast<std::uint32_t>(rng() % 3)}));
    const std::vector<std::uint32_t> gold{static_cast<std::uint32_t>(rng() % 3),
                                          static_cast<std::uint32_t>(rng() % 3)};
    for (std::size_t k = 1; k < 10; ++k)
      EXPECT_LE(path_at_k(ranked, gold, k), path_at_k(ranked, gold, k + 1));
  }
}

TEST(Metrics, SummarizeGroups) {
  Vocab ents;
  ents.add("A");
  EntityMatcher m(ents);
  std::vector<RankedPath> ranked{P({0}), P({1})};
  const std::vector<std::uint32_t> gold{1};
  std::vector<ScoredExample> scored;
  scored.push_back(score_example("inform A", "inform A", ranked, gold, m));
  scored.back().reasoning_type = "inform";
  scored.push_back(score_example("true", "false", {}, {}, m));
  scored.back().reasoning_type = "true_false";
  auto r = summarize(scored);
  EXPECT_EQ(r.overall.n, 2u);
  EXPECT_EQ(r.overall.n_path, 1u);
  EXPECT_DOUBLE_EQ(r.overall.em, 0.5);
  EXPECT_DOUBLE_EQ(r.overall.path_at_1, 0.0);
  EXPECT_DOUBLE_EQ(r.overall.path_at_3, 1.0);
  EXPECT_DOUBLE_EQ(r.by_type.at("inform").em, 1.0);
  EXPECT_DOUBLE_EQ(r.by_type.at("true_false").token_f1, 0.0);
  EXPECT_NE(r.to_tsv().find("type:inform"), std::string::npos);
  EXPECT_NE(r.to_json().find("\"by_type\""), std::string::npos);
}
