#include "dkg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "dkg/error.hpp"
#include "dkg/tokenizer.hpp"

namespace dkg {

namespace {

std::map<std::string, std::size_t> counts(std::span<const std::string> v) {
  std::map<std::string, std::size_t> c;
  for (const auto& t : v) ++c[t];
  return c;
}

template <typename T>
double multiset_f1(const std::map<T, std::size_t>& p, std::size_t np,
                   const std::map<T, std::size_t>& g, std::size_t ng) {
  if (np == 0 && ng == 0) return 1.0;
  if (np == 0 || ng == 0) return 0.0;
  std::size_t overlap = 0;
  for (const auto& [k, c] : p) {
    auto it = g.find(k);
    if (it != g.end()) overlap += std::min(c, it->second);
  }
  if (overlap == 0) return 0.0;
  const double prec = static_cast<double>(overlap) / static_cast<double>(np);
  const double rec = static_cast<double>(overlap) / static_cast<double>(ng);
  return 2.0 * prec * rec / (prec + rec);
}

}  // namespace

int exact_match(std::span<const std::string> pred, std::span<const std::string> gold) {
  if (pred.size() != gold.size()) return 0;
  std::vector<std::string> a(pred.begin(), pred.end()), b(gold.begin(), gold.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b ? 1 : 0;
}

double token_f1(std::span<const std::string> pred, std::span<const std::string> gold) {
  return multiset_f1(counts(pred), pred.size(), counts(gold), gold.size());
}

EntityMatcher::EntityMatcher(const Vocab& entities) {
  for (std::uint32_t i = 0; i < entities.size(); ++i) {
    auto toks = tokenize(entities.name(i));
    if (toks.empty()) continue;
    longest_ = std::max(longest_, toks.size());
    names_.emplace(std::move(toks), i);
  }
}

std::vector<std::uint32_t> EntityMatcher::mentions(
    std::span<const std::string> tokens) const {
  std::vector<std::uint32_t> out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::size_t matched = 0;
    const std::size_t max_len = std::min(longest_, tokens.size() - i);
    for (std::size_t len = max_len; len >= 1; --len) {
      std::vector<std::string> key(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                   tokens.begin() + static_cast<std::ptrdiff_t>(i + len));
      auto it = names_.find(key);
      if (it != names_.end()) {
        out.push_back(it->second);
        matched = len;
        break;
      }
    }
    i += matched ? matched : 1;
  }
  return out;
}

double entity_f1(std::span<const std::string> pred, std::span<const std::string> gold,
                 const EntityMatcher& matcher) {
  std::map<std::uint32_t, std::size_t> p, g;
  const auto pm = matcher.mentions(pred);
  const auto gm = matcher.mentions(gold);
  for (auto e : pm) ++p[e];
  for (auto e : gm) ++g[e];
  return multiset_f1(p, pm.size(), g, gm.size());
}

double corpus_bleu(std::span<const Tokens> preds, std::span<const Tokens> golds,
                   std::size_t max_n) {
  if (preds.size() != golds.size())
    throw usage_error("corpus_bleu: " + std::to_string(preds.size()) +
                      " predictions vs " + std::to_string(golds.size()) +
                      " references");
  if (max_n < 1) throw usage_error("corpus_bleu: max_n must be >= 1");
  std::size_t c = 0, r = 0;
  std::vector<std::size_t> clipped(max_n, 0), total(max_n, 0), ref_total(max_n, 0);
  for (std::size_t s = 0; s < preds.size(); ++s) {
    const auto& p = preds[s];
    const auto& g = golds[s];
    c += p.size();
    r += g.size();
    for (std::size_t n = 1; n <= max_n; ++n) {
      std::map<std::vector<std::string>, std::size_t> pc, gc;
      for (std::size_t i = 0; i + n <= p.size(); ++i)
        ++pc[std::vector<std::string>(p.begin() + static_cast<std::ptrdiff_t>(i),
                                      p.begin() + static_cast<std::ptrdiff_t>(i + n))];
      for (std::size_t i = 0; i + n <= g.size(); ++i)
        ++gc[std::vector<std::string>(g.begin() + static_cast<std::ptrdiff_t>(i),
                                      g.begin() + static_cast<std::ptrdiff_t>(i + n))];
      for (const auto& [gram, k] : pc) {
        total[n - 1] += k;
        auto it = gc.find(gram);
        if (it != gc.end()) clipped[n - 1] += std::min(k, it->second);
      }
      for (const auto& [gram, k] : gc) ref_total[n - 1] += k;
    }
  }
  if (c == 0) return r == 0 ? 1.0 : 0.0;
  // Orders that neither side can form (all sentences shorter than n) carry
  // no evidence and are left out of the geometric mean.
  double log_sum = 0.0;
  std::size_t used = 0;
  for (std::size_t n = 0; n < max_n; ++n) {
    if (total[n] == 0 && ref_total[n] == 0) continue;
    if (clipped[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(clipped[n]) / static_cast<double>(total[n]));
    ++used;
  }
  const double bp = c < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c))
                          : 1.0;
  return bp * std::exp(log_sum / static_cast<double>(used));
}

int path_at_k(std::span<const RankedPath> ranked,
              std::span<const std::uint32_t> gold, std::size_t k) {
  if (k < 1) throw usage_error("path@k: k must be >= 1");
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i)
    if (std::equal(ranked[i].relations.begin(), ranked[i].relations.end(),
                   gold.begin(), gold.end()))
      return 1;
  return 0;
}

ScoredExample score_example(const std::string& pred, const std::string& gold,
                            std::span<const RankedPath> ranked,
                            std::span<const std::uint32_t> gold_path,
                            const EntityMatcher& matcher) {
  ScoredExample s;
  s.pred = tokenize(pred);
  s.gold = tokenize(gold);
  s.em = exact_match(s.pred, s.gold);
  s.token_f1 = token_f1(s.pred, s.gold);
  s.entity_f1 = entity_f1(s.pred, s.gold, matcher);
  s.has_path = !gold_path.empty();
  if (s.has_path) {
    s.path_at_1 = path_at_k(ranked, gold_path, 1);
    s.path_at_3 = path_at_k(ranked, gold_path, 3);
    s.path_at_5 = path_at_k(ranked, gold_path, 5);
  }
  return s;
}

namespace {

struct GroupSum {
  std::size_t n = 0, n_path = 0;
  double em = 0, tf1 = 0, ef1 = 0, p1 = 0, p3 = 0, p5 = 0;

  void add(const ScoredExample& s) {
    ++n;
    em += s.em;
    tf1 += s.token_f1;
    ef1 += s.entity_f1;
    if (s.has_path) {
      ++n_path;
      p1 += s.path_at_1;
      p3 += s.path_at_3;
      p5 += s.path_at_5;
    }
  }

  MetricGroup done() const {
    MetricGroup g;
    g.n = n;
    g.n_path = n_path;
    if (n) {
      g.em = em / static_cast<double>(n);
      g.token_f1 = tf1 / static_cast<double>(n);
      g.entity_f1 = ef1 / static_cast<double>(n);
    }
    if (n_path) {
      g.path_at_1 = p1 / static_cast<double>(n_path);
      g.path_at_3 = p3 / static_cast<double>(n_path);
      g.path_at_5 = p5 / static_cast<double>(n_path);
    }
    return g;
  }
};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

std::string group_row(const std::string& name, const MetricGroup& g) {
  return name + '\t' + std::to_string(g.n) + '\t' + num(g.em) + '\t' +
         num(g.token_f1) + '\t' + num(g.entity_f1) + '\t' + std::to_string(g.n_path) +
         '\t' + num(g.path_at_1) + '\t' + num(g.path_at_3) + '\t' +
         num(g.path_at_5) + '\n';
}

nlohmann::json group_json(const MetricGroup& g) {
  return {{"n", g.n},         {"em", g.em},         {"token_f1", g.token_f1},
          {"entity_f1", g.entity_f1}, {"n_path", g.n_path},
          {"path@1", g.path_at_1}, {"path@3", g.path_at_3},
          {"path@5", g.path_at_5}};
}

}  // namespace

EvalReport summarize(std::span<const ScoredExample> scored) {
  GroupSum all;
  std::map<std::string, GroupSum> types, domains;
  std::vector<Tokens> preds, golds;
  for (const auto& s : scored) {
    all.add(s);
    if (!s.reasoning_type.empty()) types[s.reasoning_type].add(s);
    if (!s.domain.empty()) domains[s.domain].add(s);
    preds.push_back(s.pred);
    golds.push_back(s.gold);
  }
  EvalReport r;
  r.overall = all.done();
  for (const auto& [k, g] : types) r.by_type[k] = g.done();
  for (const auto& [k, g] : domains) r.by_domain[k] = g.done();
  if (!scored.empty()) {
    r.bleu1 = corpus_bleu(preds, golds, 1);
    r.bleu2 = corpus_bleu(preds, golds, 2);
    r.bleu4 = corpus_bleu(preds, golds, 4);
  }
  return r;
}

std::string EvalReport::to_tsv() const {
  std::string s = "group\tn\tem\ttoken_f1\tentity_f1\tn_path\tpath@1\tpath@3\tpath@5\n";
  s += group_row("overall", overall);
  for (const auto& [k, g] : by_type) s += group_row("type:" + k, g);
  for (const auto& [k, g] : by_domain) s += group_row("domain:" + k, g);
  s += "bleu1\t" + num(100.0 * bleu1) + '\n';
  s += "bleu2\t" + num(100.0 * bleu2) + '\n';
  s += "bleu4\t" + num(100.0 * bleu4) + '\n';
  return s;
}

std::string EvalReport::to_json() const {
  nlohmann::json j = group_json(overall);
  j["bleu1"] = 100.0 * bleu1;
  j["bleu2"] = 100.0 * bleu2;
  j["bleu4"] = 100.0 * bleu4;
  j["by_type"] = nlohmann::json::object();
  for (const auto& [k, g] : by_type) j["by_type"][k] = group_json(g);
  j["by_domain"] = nlohmann::json::object();
  for (const auto& [k, g] : by_domain) j["by_domain"][k] = group_json(g);
  return j.dump(2) + '\n';
}

}  // namespace dkg
