#include <gtest/gtest.h>

#include <random>

#include "dkg/error.hpp"
#include "dkg/sparse.hpp"

namespace {

dkg::BinaryCsr random_csr(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::vector<std::uint64_t> ptr{0};
  std::vector<std::uint32_t> idx;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c)
      if (rng() % 3 == 0) idx.push_back(c);
    ptr.push_back(idx.size());
  }
  return dkg::BinaryCsr(cols, ptr, idx);
}

}  // namespace

TEST(Sparse, ApplyMatchesDense) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t rows = 1 + rng() % 9, cols = 1 + rng() % 9;
    auto m = random_csr(rng, rows, cols);
    const dkg::Tensor d = m.to_dense();
    std::vector<double> v(cols), w(rows);
    for (auto& x : v) x = u(rng);
    for (auto& x : w) x = u(rng);
    std::vector<double> mv(rows), mtw(cols, 0.0);
    m.apply(v, mv);
    m.apply_transpose_add(w, mtw);
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < cols; ++c) s += d(r, c) * v[c];
      EXPECT_NEAR(mv[r], s, 1e-14);
    }
    for (std::size_t c = 0; c < cols; ++c) {
      double s = 0;
      for (std::size_t r = 0; r < rows; ++r) s += d(r, c) * w[r];
      EXPECT_NEAR(mtw[c], s, 1e-14);
    }
  }
}

TEST(Sparse, TransposeAccumulates) {
  auto m = dkg::BinaryCsr::one_hot_rows(3, {0, 2, 2});
  std::vector<double> out{1.0, 1.0, 1.0};
  std::vector<double> v{1.0, 2.0, 3.0};
  m.apply_transpose_add(v, out);
  EXPECT_EQ(out, (std::vector<double>{2.0, 1.0, 6.0}));
}

TEST(Sparse, Linearity) {
  std::mt19937_64 rng(9);
  auto m = random_csr(rng, 7, 5);
  std::vector<double> a{1, -2, 3, 0.5, 4}, b{0.25, 1, -1, 2, 0};
  std::vector<double> ab(5), ma(7), mb(7), mab(7);
  for (int i = 0; i < 5; ++i) ab[i] = 2.0 * a[i] - 3.0 * b[i];
  m.apply(a, ma);
  m.apply(b, mb);
  m.apply(ab, mab);
  for (int r = 0; r < 7; ++r) EXPECT_NEAR(mab[r], 2.0 * ma[r] - 3.0 * mb[r], 1e-12);
}

TEST(Sparse, OneHotRowsShape) {
  auto m = dkg::BinaryCsr::one_hot_rows(4, {3, 0, 1});
  EXPECT_EQ(m.rows(), 3u);
  EXPECT_EQ(m.cols(), 4u);
  EXPECT_EQ(m.nnz(), 3u);
  EXPECT_EQ(m.row(0)[0], 3u);
}

TEST(Sparse, RejectsBadStructure) {
  EXPECT_THROW(dkg::BinaryCsr(3, {0, 2, 1, 2}, {0, 1}), dkg::Error);
  EXPECT_THROW(dkg::BinaryCsr(2, {0, 1}, {5}), dkg::Error);
  EXPECT_THROW(dkg::BinaryCsr(2, {0, 3}, {0}), dkg::Error);
}
