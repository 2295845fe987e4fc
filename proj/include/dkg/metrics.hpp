#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dkg/kg_store.hpp"
#include "dkg/reasoner.hpp"

namespace dkg {

using Tokens = std::vector<std::string>;

/// 1 iff the token multisets are equal.
int exact_match(std::span<const std::string> pred, std::span<const std::string> gold);

/// Harmonic mean of multiset-overlap precision and recall.
double token_f1(std::span<const std::string> pred, std::span<const std::string> gold);

/// Finds KG entity mentions in token sequences by greedy longest match.
class EntityMatcher {
 public:
  explicit EntityMatcher(const Vocab& entities);
  /// Entity ids in mention order.
  std::vector<std::uint32_t> mentions(std::span<const std::string> tokens) const;

 private:
  std::map<std::vector<std::string>, std::uint32_t> names_;
  std::size_t longest_ = 0;
};

double entity_f1(std::span<const std::string> pred, std::span<const std::string> gold,
                 const EntityMatcher& matcher);

/// Corpus BLEU with uniform weights over 1..max_n grams and brevity penalty.
double corpus_bleu(std::span<const Tokens> preds, std::span<const Tokens> golds,
                   std::size_t max_n = 4);

/// 1 iff `gold` equals one of the first k ranked paths.
int path_at_k(std::span<const RankedPath> ranked,
              std::span<const std::uint32_t> gold, std::size_t k);

struct MetricGroup {
  std::size_t n = 0;
  std::size_t n_path = 0;  // examples with a gold path
  double em = 0.0;
  double token_f1 = 0.0;
  double entity_f1 = 0.0;
  double path_at_1 = 0.0;
  double path_at_3 = 0.0;
  double path_at_5 = 0.0;
};

struct EvalReport {
  MetricGroup overall;
  double bleu1 = 0.0, bleu2 = 0.0, bleu4 = 0.0;
  std::map<std::string, MetricGroup> by_type;
  std::map<std::string, MetricGroup> by_domain;

  std::string to_tsv() const;
  std::string to_json() const;
};

/// One scored example, as accumulated into a report.
struct ScoredExample {
  Tokens pred, gold;
  int em = 0;
  double token_f1 = 0.0;
  double entity_f1 = 0.0;
  bool has_path = false;
  int path_at_1 = 0, path_at_3 = 0, path_at_5 = 0;
  std::string reasoning_type;  // empty when untagged
  std::string domain;
};

ScoredExample score_example(const std::string& pred, const std::string& gold,
                            std::span<const RankedPath> ranked,
                            std::span<const std::uint32_t> gold_path,
                            const EntityMatcher& matcher);

/// Aggregates in the given order.
EvalReport summarize(std::span<const ScoredExample> scored);

}  // namespace dkg
