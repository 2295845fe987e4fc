#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dkg/diffmath.hpp"
#include "dkg/error.hpp"

namespace ad = dkg::ad;
using dkg::Tensor;

namespace {

Tensor rand_tensor(std::mt19937_64& rng, std::size_t r, std::size_t c, double lo = -1,
                   double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(r, c);
  for (auto& x : t.data) x = u(rng);
  return t;
}

// Reduces any output to a scalar through fixed random weights so every
// output entry contributes a distinct gradient.
ad::Var project(ad::Var out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor w = rand_tensor(rng, out.rows(), out.cols());
  return ad::sum(ad::hadamard(out, out.tape->constant(w)));
}

double check(const ad::Program& f, std::vector<Tensor> params) {
  return ad::grad_check(f, params, 1e-5).max_rel_err;
}

}  // namespace

TEST(Diffmath, ElementwiseKernelsGradcheck) {
  std::mt19937_64 rng(11);
  std::vector<Tensor> p{rand_tensor(rng, 4, 3), rand_tensor(rng, 4, 3)};
  EXPECT_LT(check([](ad::Tape&, std::span<const ad::Var> v) {
              return project(ad::hadamard(v[0], v[1]), 1);
            }, p), 1e-6);
  EXPECT_LT(check([](ad::Tape&, std::span<const ad::Var> v) {
              return project(ad::sub(ad::add(v[0], v[1]), ad::scale(v[1], 3.0)), 2);
            }, p), 1e-6);
  EXPECT_LT(check([](ad::Tape&, std::span<const ad::Var> v) {
              return project(ad::tanh(ad::affine(v[0], 2.0, 0.5)), 3);
            }, p), 1e-6);
  EXPECT_LT(check([](ad::Tape&, std::span<const ad::Var> v) {
              return project(ad::sigmoid(v[0]), 4);
            }, p), 1e-6);
  EXPECT_LT(check([](ad::Tape&, std::span<const ad::Var> v) {
              return project(ad::scale_by(v[0], ad::element(v[1], 2)), 5);
            }, p), 1e-6);
}

TEST(Diffmath, NormalizingKernelsGradcheck) {
  std::mt19937_64 rng(12);
  std::vector<Tensor> p{rand_tensor(rng, 6, 1)};
  EXPECT_LT(check([](ad::Tape&, std::span<const ad::Var> v) {
              return project(ad::softmax(v[0]), 6);
            }, p), 1e-6);
  EXPECT_LT(check([](ad::Tape&, std::span<const ad::Var> v) {
              return project(ad::normalize_eps(v[0], 1e-12), 7);
            }, p), 1e-6);
  EXPECT_LT(check([](ad::Tape&, std::span<const ad::Var> v) {
              return ad::cross_entropy(v[0], 4);
            }, p), 1e-6);
}

TEST(Diffmath, StructuralKernelsGradcheck) {
  std::mt19937_64 rng(13);
  std::vector<Tensor> p{rand_tensor(rng, 3, 4), rand_tensor(rng, 4, 2),
                        rand_tensor(rng, 3, 1)};
  EXPECT_LT(check([](ad::Tape&, std::span<const ad::Var> v) {
              return project(ad::matmul(v[0], v[1]), 8);
            }, p), 1e-6);
  EXPECT_LT(check([](ad::Tape&, std::span<const ad::Var> v) {
              return project(ad::matmul(v[1], v[0], true, true), 9);
            }, p), 1e-6);
  EXPECT_LT(check([](ad::Tape&, std::span<const ad::Var> v) {
              return project(ad::matmul(v[0], v[2], true, false), 10);
            }, p), 1e-6);
  EXPECT_LT(check([](ad::Tape&, std::span<const ad::Var> v) {
              auto b = ad::slice(v[1], 0, 4);
              return project(ad::add_row_broadcast(v[0], b), 11);
            }, p), 1e-6);
  EXPECT_LT(check([](ad::Tape&, std::span<const ad::Var> v) {
              return project(ad::mean_rows(v[0]), 12);
            }, p), 1e-6);
  EXPECT_LT(check([](ad::Tape&, std::span<const ad::Var> v) {
              return project(ad::block_mean(v[0], 2), 13);
            }, p), 1e-6);
  EXPECT_LT(check([](ad::Tape&, std::span<const ad::Var> v) {
              std::vector<std::int64_t> idx{2, ad::kZeroRow, 0, 2};
              return project(ad::gather_rows(v[0], idx), 14);
            }, p), 1e-6);
  EXPECT_LT(check([](ad::Tape&, std::span<const ad::Var> v) {
              std::vector<std::size_t> idx{1, 1, 0};
              return project(ad::gather(v[2], idx), 15);
            }, p), 1e-6);
  EXPECT_LT(check([](ad::Tape&, std::span<const ad::Var> v) {
              return project(ad::scale_rows(v[0], v[2]), 16);
            }, p), 1e-6);
  EXPECT_LT(check([](ad::Tape&, std::span<const ad::Var> v) {
              std::vector<ad::Var> parts{v[0], v[2]};
              return project(ad::reshape(ad::concat(parts), 5, 3), 17);
            }, p), 1e-6);
  EXPECT_LT(check([](ad::Tape&, std::span<const ad::Var> v) {
              std::vector<ad::Var> parts{v[0], ad::reshape(v[1], 2, 4)};
              return project(ad::vconcat(parts), 18);
            }, p), 1e-6);
}

TEST(Diffmath, SparseKernelsGradcheck) {
  auto m = dkg::BinaryCsr::one_hot_rows(3, {0, 2, 2, 1, 0});
  std::mt19937_64 rng(14);
  std::vector<Tensor> p{rand_tensor(rng, 3, 1), rand_tensor(rng, 5, 1)};
  EXPECT_LT(check([&](ad::Tape&, std::span<const ad::Var> v) {
              return project(ad::sp_apply(m, v[0]), 19);
            }, p), 1e-6);
  EXPECT_LT(check([&](ad::Tape&, std::span<const ad::Var> v) {
              return project(ad::sp_apply_transpose(m, v[1]), 20);
            }, p), 1e-6);
}

TEST(Diffmath, SoftmaxValues) {
  ad::Tape tape;
  auto s = ad::softmax(tape.leaf(Tensor::vector({0.0, 0.0})));
  EXPECT_DOUBLE_EQ(s.value()[0], 0.5);
  auto big = ad::softmax(tape.leaf(Tensor::vector({1000.0, 1000.0, 1000.0})));
  for (double x : big.value().data) EXPECT_NEAR(x, 1.0 / 3.0, 1e-15);
  EXPECT_THROW(ad::softmax(tape.leaf(Tensor::vector({NAN, 1.0}))), dkg::Error);
  EXPECT_THROW(ad::softmax(tape.leaf(Tensor::vector({INFINITY, 1.0}))), dkg::Error);
}

TEST(Diffmath, NormalizeEpsValues) {
  ad::Tape tape;
  auto n = ad::normalize_eps(tape.leaf(Tensor::vector({3.0, 4.0})), 1e-12);
  EXPECT_NEAR(n.value()[0], 0.6, 1e-12);
  EXPECT_NEAR(n.value()[1], 0.8, 1e-12);
  auto z = tape.leaf(Tensor::vector({0.0, 0.0, 0.0}));
  auto nz = ad::normalize_eps(z, 1e-12);
  for (double x : nz.value().data) EXPECT_EQ(x, 0.0);
  tape.backward(ad::sum(nz));
  for (double g : tape.grad(z).data) EXPECT_EQ(g, 0.0);
}

TEST(Diffmath, CrossEntropyValue) {
  ad::Tape tape;
  auto l = ad::cross_entropy(tape.leaf(Tensor::vector({0.0, 0.0, 0.0, 0.0})), 2);
  EXPECT_NEAR(l.scalar(), std::log(4.0), 1e-15);
}

TEST(Diffmath, GradientsAccumulateOverReuse) {
  ad::Tape tape;
  auto x = tape.leaf(Tensor::vector({2.0}));
  auto y = ad::hadamard(x, x);
  tape.backward(ad::sum(ad::add(y, x)));
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 5.0);
}

TEST(Diffmath, TapeMisuseErrors) {
  ad::Tape tape, other;
  auto a = tape.leaf(Tensor::vector({1.0, 2.0}));
  auto b = other.leaf(Tensor::vector({1.0, 2.0}));
  EXPECT_THROW(ad::add(a, b), dkg::Error);
  EXPECT_THROW(ad::add(a, tape.leaf(Tensor::vector({1.0}))), dkg::Error);
  EXPECT_THROW(tape.backward(a), dkg::Error);
  auto s = ad::sum(a);
  tape.backward(s);
  EXPECT_THROW(tape.backward(s), dkg::Error);
  EXPECT_THROW(ad::sum(a), dkg::Error);
}

TEST(Diffmath, GradCheckCatchesWrongAdjoint) {
  // A hand-built op whose adjoint is off by a factor of two.
  const ad::Program bad = [](ad::Tape& tape, std::span<const ad::Var> v) {
    Tensor out = v[0].value();
    for (auto& x : out.data) x = x * x;
    auto y = tape.record(out, {v[0]}, [in = v[0]](ad::Tape& t, const Tensor&,
                                                   const Tensor& g) {
      Tensor* acc = t.accumulator(in);
      for (std::size_t i = 0; i < g.size(); ++i) acc->data[i] += 4.0 * in.value()[i] * g[i];
    });
    return ad::sum(y);
  };
  std::vector<Tensor> p{Tensor::vector({0.5, -1.5})};
  EXPECT_GT(ad::grad_check(bad, p, 1e-5).max_rel_err, 0.3);
  EXPECT_EQ(p[0].data, (std::vector<double>{0.5, -1.5}));
}
