#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "dkg/sparse.hpp"
#include "dkg/tensor.hpp"

namespace dkg::ad {

class Tape;

/// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t size() const { return value().size(); }
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
  double scalar() const { return value().data.at(0); }
};

/// Linear record of executed operations.
///
/// Backward replays adjoints in exact reverse execution order. A tape supports
/// a single backward pass; it is meant to live for one forward/backward.
class Tape {
 public:
  /// Propagates `out_grad` of a node into its inputs' accumulators.
  using Adjoint = std::function<void(Tape&, const Tensor& out_value,
                                     const Tensor& out_grad)>;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient after backward(); zeros if the node received none.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Seeds d(loss)/d(loss) = 1; `loss` must hold exactly one value.
  void backward(Var loss);
  bool consumed() const noexcept { return consumed_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Records an op result. `adjoint` is dropped when no input needs a grad.
  Var record(Tensor value, std::initializer_list<Var> inputs, Adjoint adjoint);
  Var record(Tensor value, std::span<const Var> inputs, Adjoint adjoint);

  /// Gradient buffer of an input, or nullptr when it needs no gradient.
  Tensor* accumulator(Var v);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Adjoint adjoint;
  };
  std::deque<Node> nodes_;
  bool consumed_ = false;
};

// ---- kernels --------------------------------------------------------------
// Shapes follow Tensor: vectors are n x 1. All kernels check shapes and throw
// dkg::Error on mismatch.

/// M v for a binary sparse matrix; backward adds M^T g.
Var sp_apply(const BinaryCsr& m, Var v);
/// M^T v; backward adds M g.
Var sp_apply_transpose(const BinaryCsr& m, Var v);

Var hadamard(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
/// alpha * a + beta, elementwise.
Var affine(Var a, double alpha, double beta);
/// s * a where s holds a single value.
Var scale_by(Var a, Var s);
Var tanh(Var a);
Var sigmoid(Var a);

/// Max-shifted softmax over all entries. Throws on NaN/inf input.
Var softmax(Var v);
/// v / (||v||_2 + eps). The zero vector maps to zero with zero gradient.
Var normalize_eps(Var v, double eps);

Var sum(Var a);
Var element(Var a, std::size_t i);
/// Flat entries [offset, offset + len) as a vector.
Var slice(Var a, std::size_t offset, std::size_t len);
Var reshape(Var a, std::size_t rows, std::size_t cols);
/// Flat concatenation of the inputs' entries.
Var concat(std::span<const Var> parts);
/// Stacks matrices with equal column count.
Var vconcat(std::span<const Var> parts);

/// op(A) op(B) with op = transpose when the flag is set.
Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
/// Adds vector b (length cols) to every row of m.
Var add_row_broadcast(Var m, Var b);
/// Mean over rows -> vector of length cols.
Var mean_rows(Var m);

inline constexpr std::int64_t kZeroRow = -1;
/// Rows of `table` by index; kZeroRow yields a zero row.
Var gather_rows(Var table, std::span<const std::int64_t> idx);
/// Entries of vector v by index.
Var gather(Var v, std::span<const std::size_t> idx);
/// Row i of m scaled by w[i].
Var scale_rows(Var m, Var w);
/// Each row of m (n x blocks*width) averaged over its `blocks` contiguous
/// chunks -> n x width.
Var block_mean(Var m, std::size_t blocks);

/// -log softmax(logits)[target] as a scalar.
Var cross_entropy(Var logits, std::size_t target);

// ---- gradient checking ----------------------------------------------------

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::vector<double> per_param;  // max over each parameter's coordinates
};

/// Scalar program over leaf parameters; must be deterministic.
using Program = std::function<Var(Tape&, std::span<const Var>)>;

/// Central differences (f(p+h) - f(p-h)) / 2h per coordinate against the
/// tape gradient; error is |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult grad_check(const Program& f, std::vector<Tensor>& params,
                           double h);

}  // namespace dkg::ad
