#pragma once

// Independent reference implementations used by the tests. Everything here
// works on plain dense arrays and never calls into the sparse or tape code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "dkg/kg_store.hpp"

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline Vec dense_next(const std::vector<dkg::Triple>& triples, std::size_t n_e,
                      const Vec& e, const Vec& r, double eps, bool normalize = true) {
  const std::size_t n_t = triples.size();
  // Full N_T x N_E / N_T x N_R indicator matrices, multiplied out.
  Mat mh(n_t, Vec(n_e, 0.0)), mt(n_t, Vec(n_e, 0.0)), mr(n_t, Vec(r.size(), 0.0));
  for (std::size_t k = 0; k < n_t; ++k) {
    mh[k][triples[k].head] = 1.0;
    mr[k][triples[k].relation] = 1.0;
    mt[k][triples[k].tail] = 1.0;
  }
  Vec x(n_t, 0.0);
  for (std::size_t k = 0; k < n_t; ++k) {
    double he = 0.0, rr = 0.0;
    for (std::size_t j = 0; j < n_e; ++j) he += mh[k][j] * e[j];
    for (std::size_t j = 0; j < r.size(); ++j) rr += mr[k][j] * r[j];
    x[k] = he * rr;
  }
  Vec out(n_e, 0.0);
  for (std::size_t j = 0; j < n_e; ++j)
    for (std::size_t k = 0; k < n_t; ++k) out[j] += mt[k][j] * x[k];
  if (!normalize) return out;
  double norm = 0.0;
  for (double v : out) norm += v * v;
  norm = std::sqrt(norm);
  for (double& v : out) v /= norm + eps;
  return out;
}

inline Vec dense_softmax(const Vec& z) {
  double mx = *std::max_element(z.begin(), z.end());
  Vec out(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += out[i] = std::exp(z[i] - mx);
  for (double& v : out) v /= s;
  return out;
}

// E[i][t][k]: entity i, token t, dimension k.
using Tensor3 = std::vector<Mat>;

inline Vec dense_operate(const Vec& e, const Vec& a, const Tensor3& E) {
  Vec scores(e.size(), 0.0);
  for (std::size_t i = 0; i < e.size(); ++i) {
    const std::size_t m = E[i].size();
    for (std::size_t k = 0; k < a.size(); ++k) {
      double pooled = 0.0;
      for (std::size_t t = 0; t < m; ++t) pooled += E[i][t][k] * e[i];
      scores[i] += a[k] * pooled / static_cast<double>(m);
    }
  }
  return dense_softmax(scores);
}

inline Tensor3 unpack(const dkg::Tensor& flat, std::size_t m) {
  const std::size_t d = flat.cols / m;
  Tensor3 E(flat.rows, Mat(m, Vec(d)));
  for (std::size_t i = 0; i < flat.rows; ++i)
    for (std::size_t t = 0; t < m; ++t)
      for (std::size_t k = 0; k < d; ++k) E[i][t][k] = flat(i, t * d + k);
  return E;
}

/// Walk/check/combine over H hops; gates[h] = (walk, check).
inline Vec dense_traverse(const std::vector<dkg::Triple>& triples, std::size_t n_e,
                          const Vec& e1, const std::vector<Vec>& rels,
                          const std::vector<Vec>* gates, const Vec* a,
                          const Tensor3* E, double eps) {
  Vec e = e1;
  for (std::size_t h = 0; h < rels.size(); ++h) {
    Vec walk = dense_next(triples, n_e, e, rels[h], eps);
    if (!gates) {
      e = walk;
      continue;
    }
    Vec check = dense_operate(e, *a, *E);
    for (std::size_t i = 0; i < n_e; ++i)
      e[i] = (*gates)[h][0] * walk[i] + (*gates)[h][1] * check[i];
  }
  return e;
}

/// Every relation sequence of exactly `hops` steps that the symbolic frontier
/// supports, scored by the product of per-hop probabilities, trailing
/// `to_self` stripped, ranked by score then lexicographically.
struct Path {
  std::vector<std::uint32_t> rels;
  double score;
};

inline std::vector<Path> brute_force_paths(const std::vector<dkg::Triple>& triples,
                                           const std::vector<std::uint32_t>& start,
                                           const std::vector<Vec>& rels,
                                           std::uint32_t to_self) {
  std::vector<Path> done;
  struct State {
    std::vector<std::uint32_t> rels;
    double score;
    std::vector<std::uint32_t> frontier;
  };
  std::vector<State> cur{{{}, 1.0, start}};
  for (std::size_t h = 0; h < rels.size(); ++h) {
    std::vector<State> next;
    for (const auto& s : cur) {
      for (std::uint32_t r = 0; r < rels[h].size(); ++r) {
        std::vector<std::uint32_t> tails;
        for (const auto& t : triples)
          if (t.relation == r &&
              std::find(s.frontier.begin(), s.frontier.end(), t.head) != s.frontier.end())
            tails.push_back(t.tail);
        if (tails.empty()) continue;
        std::sort(tails.begin(), tails.end());
        tails.erase(std::unique(tails.begin(), tails.end()), tails.end());
        State n{s.rels, s.score * rels[h][r], tails};
        n.rels.push_back(r);
        next.push_back(n);
      }
    }
    cur = next;
  }
  std::vector<std::pair<std::vector<std::uint32_t>, double>> full;
  for (auto& s : cur) full.push_back({s.rels, s.score});
  std::sort(full.begin(), full.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (auto& [r, sc] : full) {
    while (!r.empty() && r.back() == to_self) r.pop_back();
    done.push_back({r, sc});
  }
  return done;
}

/// Random KG over `n_e` entities and `n_r` relations; names are e<i>/r<j>.
inline std::vector<dkg::StringTriple> random_triples(std::mt19937_64& rng, std::size_t n_e,
                                                     std::size_t n_r, std::size_t n_t) {
  std::vector<dkg::StringTriple> out;
  for (std::size_t i = 0; i < n_e; ++i)
    out.push_back({"e" + std::to_string(i), "r" + std::to_string(i % n_r),
                   "e" + std::to_string((i + 1) % n_e)});
  while (out.size() < n_t)
    out.push_back({"e" + std::to_string(rng() % n_e), "r" + std::to_string(rng() % n_r),
                   "e" + std::to_string(rng() % n_e)});
  return out;
}

inline Vec random_distribution(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Vec z(n);
  for (double& v : z) v = u(rng);
  return dense_softmax(z);
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() /
           ("dkg_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Runs a shell command, returning its exit status and captured stdout.
inline int run(const std::string& cmd, std::string* out = nullptr) {
  std::string full = cmd + " 2>/dev/null";
  FILE* pipe = ::popen(full.c_str(), "r");
  if (!pipe) return -1;
  std::string text;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) text.append(buf, n);
  const int status = ::pclose(pipe);
  if (out) *out = text;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace oracle
