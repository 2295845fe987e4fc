#include "dkg/diffmath.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dkg/error.hpp"

namespace dkg::ad {

const Tensor& Var::value() const { return tape->value(*this); }
const Tensor& Var::grad() const { return tape->grad(*this); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  if (requires_grad) n.grad = Tensor(value.rows, value.cols);
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tensor& Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (!n.requires_grad)
    throw usage_error("gradient requested for a node that does not require one");
  return n.grad;
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs,
                 Adjoint adjoint) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(adjoint));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, Adjoint adjoint) {
  if (consumed_) throw usage_error("tape already consumed by backward");
  bool needs = false;
  for (Var in : inputs) {
    if (in.tape != this) throw usage_error("op mixes values from different tapes");
    needs = needs || nodes_[in.id].requires_grad;
  }
  Var out = leaf(std::move(value), needs);
  if (needs) nodes_.back().adjoint = std::move(adjoint);
  return out;
}

Tensor* Tape::accumulator(Var v) {
  Node& n = nodes_[v.id];
  return n.requires_grad ? &n.grad : nullptr;
}

void Tape::backward(Var loss) {
  if (consumed_) throw usage_error("tape already consumed by backward");
  if (loss.tape != this || value(loss).size() != 1)
    throw usage_error("backward needs a scalar on this tape");
  consumed_ = true;
  if (!nodes_[loss.id].requires_grad) return;
  nodes_[loss.id].grad.data[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.adjoint) n.adjoint(*this, n.value, n.grad);
  }
}

namespace {

void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw data_error(std::string(op) + ": " + what);
}

std::string shape(const Tensor& t) {
  return std::to_string(t.rows) + "x" + std::to_string(t.cols);
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  require(a.same_shape(b), op, "shape mismatch " + shape(a) + " vs " + shape(b));
}

void require_vector(const Tensor& a, const char* op) {
  require(a.cols == 1, op, "expected a column vector, got " + shape(a));
}

// C += op(A) op(B); A is ar x ac, B is br x bc (storage shapes).
void gemm_acc(bool ta, bool tb, const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t m = ta ? a.cols : a.rows;
  const std::size_t k = ta ? a.rows : a.cols;
  const std::size_t n = tb ? b.rows : b.cols;
  const double* A = a.data.data();
  const double* B = b.data.data();
  double* C = c.data.data();
  if (!tb) {
    for (std::size_t i = 0; i < m; ++i) {
      double* ci = C + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ta ? A[p * a.cols + i] : A[i * a.cols + p];
        if (av == 0.0) continue;
        const double* bp = B + p * b.cols;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      double* ci = C + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double* bj = B + j * b.cols;
        double s = 0.0;
        if (!ta) {
          const double* ai = A + i * a.cols;
          for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
        } else {
          for (std::size_t p = 0; p < k; ++p) s += A[p * a.cols + i] * bj[p];
        }
        ci[j] += s;
      }
    }
  }
}

#ifdef DKG_CORRUPT_ADJOINT
constexpr double kTanhAdjointScale = 1.01;
#else
constexpr double kTanhAdjointScale = 1.0;
#endif

}  // namespace

Var sp_apply(const BinaryCsr& m, Var v) {
  const Tensor& x = v.value();
  require_vector(x, "sp_apply");
  require(x.rows == m.cols(), "sp_apply",
          "vector length " + std::to_string(x.rows) + " != matrix cols " +
              std::to_string(m.cols()));
  Tensor out(m.rows(), 1);
  m.apply(x.data, out.data);
  const BinaryCsr* mp = &m;
  return v.tape->record(std::move(out), {v},
                        [v, mp](Tape& t, const Tensor&, const Tensor& g) {
                          mp->apply_transpose_add(g.data, t.accumulator(v)->data);
                        });
}

Var sp_apply_transpose(const BinaryCsr& m, Var v) {
  const Tensor& x = v.value();
  require_vector(x, "sp_apply_transpose");
  require(x.rows == m.rows(), "sp_apply_transpose",
          "vector length " + std::to_string(x.rows) + " != matrix rows " +
              std::to_string(m.rows()));
  Tensor out(m.cols(), 1);
  m.apply_transpose_add(x.data, out.data);
  const BinaryCsr* mp = &m;
  return v.tape->record(
      std::move(out), {v}, [v, mp](Tape& t, const Tensor&, const Tensor& g) {
        Tensor& acc = *t.accumulator(v);
        const auto ptr = mp->row_ptr();
        const auto col = mp->col_idx();
        for (std::size_t r = 0; r < mp->rows(); ++r) {
          double s = 0.0;
          for (auto k = ptr[r]; k < ptr[r + 1]; ++k) s += g[col[k]];
          acc[r] += s;
        }
      });
}

Var hadamard(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same(x, y, "hadamard");
  Tensor out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return a.tape->record(std::move(out), {a, b},
                        [a, b](Tape& t, const Tensor&, const Tensor& g) {
                          const Tensor& x = a.value();
                          const Tensor& y = b.value();
                          if (Tensor* ga = t.accumulator(a))
                            for (std::size_t i = 0; i < g.size(); ++i)
                              (*ga)[i] += g[i] * y[i];
                          if (Tensor* gb = t.accumulator(b))
                            for (std::size_t i = 0; i < g.size(); ++i)
                              (*gb)[i] += g[i] * x[i];
                        });
}

Var add(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same(x, y, "add");
  Tensor out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return a.tape->record(std::move(out), {a, b},
                        [a, b](Tape& t, const Tensor&, const Tensor& g) {
                          for (Var v : {a, b})
                            if (Tensor* gv = t.accumulator(v))
                              for (std::size_t i = 0; i < g.size(); ++i)
                                (*gv)[i] += g[i];
                        });
}

Var sub(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same(x, y, "sub");
  Tensor out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return a.tape->record(std::move(out), {a, b},
                        [a, b](Tape& t, const Tensor&, const Tensor& g) {
                          if (Tensor* ga = t.accumulator(a))
                            for (std::size_t i = 0; i < g.size(); ++i)
                              (*ga)[i] += g[i];
                          if (Tensor* gb = t.accumulator(b))
                            for (std::size_t i = 0; i < g.size(); ++i)
                              (*gb)[i] -= g[i];
                        });
}

Var scale(Var a, double s) { return affine(a, s, 0.0); }

Var affine(Var a, double alpha, double beta) {
  const Tensor& x = a.value();
  Tensor out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = alpha * x[i] + beta;
  return a.tape->record(std::move(out), {a},
                        [a, alpha](Tape& t, const Tensor&, const Tensor& g) {
                          Tensor& ga = *t.accumulator(a);
                          for (std::size_t i = 0; i < g.size(); ++i)
                            ga[i] += alpha * g[i];
                        });
}

Var scale_by(Var a, Var s) {
  const Tensor& x = a.value();
  require(s.value().size() == 1, "scale_by", "scale must be a scalar");
  const double sv = s.value()[0];
  Tensor out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = sv * x[i];
  return a.tape->record(std::move(out), {a, s},
                        [a, s](Tape& t, const Tensor&, const Tensor& g) {
                          const Tensor& x = a.value();
                          const double sv = s.value()[0];
                          if (Tensor* ga = t.accumulator(a))
                            for (std::size_t i = 0; i < g.size(); ++i)
                              (*ga)[i] += sv * g[i];
                          if (Tensor* gs = t.accumulator(s)) {
                            double d = 0.0;
                            for (std::size_t i = 0; i < g.size(); ++i)
                              d += g[i] * x[i];
                            (*gs)[0] += d;
                          }
                        });
}

Var tanh(Var a) {
  const Tensor& x = a.value();
  Tensor out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
  return a.tape->record(std::move(out), {a},
                        [a](Tape& t, const Tensor& y, const Tensor& g) {
                          Tensor& ga = *t.accumulator(a);
                          for (std::size_t i = 0; i < g.size(); ++i)
                            ga[i] += kTanhAdjointScale * g[i] * (1.0 - y[i] * y[i]);
                        });
}

Var sigmoid(Var a) {
  const Tensor& x = a.value();
  Tensor out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = x[i];
    out[i] = z >= 0 ? 1.0 / (1.0 + std::exp(-z))
                    : std::exp(z) / (1.0 + std::exp(z));
  }
  return a.tape->record(std::move(out), {a},
                        [a](Tape& t, const Tensor& y, const Tensor& g) {
                          Tensor& ga = *t.accumulator(a);
                          for (std::size_t i = 0; i < g.size(); ++i)
                            ga[i] += g[i] * y[i] * (1.0 - y[i]);
                        });
}

Var softmax(Var v) {
  const Tensor& x = v.value();
  require(x.size() > 0, "softmax", "empty input");
  if (!all_finite(x.data)) throw numeric_error("softmax: non-finite input");
  const double mx = *std::max_element(x.data.begin(), x.data.end());
  Tensor out(x.rows, x.cols);
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) z += (out[i] = std::exp(x[i] - mx));
  for (double& y : out.data) y /= z;
  return v.tape->record(std::move(out), {v},
                        [v](Tape& t, const Tensor& y, const Tensor& g) {
                          double dot = 0.0;
                          for (std::size_t i = 0; i < g.size(); ++i)
                            dot += g[i] * y[i];
                          Tensor& gv = *t.accumulator(v);
                          for (std::size_t i = 0; i < g.size(); ++i)
                            gv[i] += y[i] * (g[i] - dot);
                        });
}

Var normalize_eps(Var v, double eps) {
  require(eps > 0.0, "normalize_eps", "eps must be positive");
  const Tensor& x = v.value();
  if (!all_finite(x.data)) throw numeric_error("normalize_eps: non-finite input");
  const double norm = l2_norm(x.data);
  const double denom = norm + eps;
  Tensor out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] / denom;
  return v.tape->record(
      std::move(out), {v},
      [v, norm, denom](Tape& t, const Tensor& y, const Tensor& g) {
        if (norm == 0.0) return;
        // y = x / (|x| + eps);  dy/dx = I/denom - x x^T / (|x| denom^2)
        const Tensor& x = v.value();
        double gx = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) gx += g[i] * x[i];
        const double c = gx / (norm * denom * denom);
        Tensor& gv = *t.accumulator(v);
        for (std::size_t i = 0; i < g.size(); ++i)
          gv[i] += g[i] / denom - c * x[i];
        (void)y;
      });
}

Var sum(Var a) {
  double s = 0.0;
  for (double x : a.value().data) s += x;
  return a.tape->record(Tensor(1, 1, s), {a},
                        [a](Tape& t, const Tensor&, const Tensor& g) {
                          for (double& x : t.accumulator(a)->data) x += g[0];
                        });
}

Var element(Var a, std::size_t i) { return slice(a, i, 1); }

Var slice(Var a, std::size_t offset, std::size_t len) {
  const Tensor& x = a.value();
  require(offset + len <= x.size(), "slice", "range out of bounds");
  Tensor out(len, 1);
  std::copy_n(x.data.begin() + static_cast<std::ptrdiff_t>(offset), len,
              out.data.begin());
  return a.tape->record(std::move(out), {a},
                        [a, offset](Tape& t, const Tensor&, const Tensor& g) {
                          Tensor& ga = *t.accumulator(a);
                          for (std::size_t i = 0; i < g.size(); ++i)
                            ga[offset + i] += g[i];
                        });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  const Tensor& x = a.value();
  require(rows * cols == x.size(), "reshape", "size mismatch");
  return a.tape->record(Tensor(rows, cols, x.data), {a},
                        [a](Tape& t, const Tensor&, const Tensor& g) {
                          Tensor& ga = *t.accumulator(a);
                          for (std::size_t i = 0; i < g.size(); ++i)
                            ga[i] += g[i];
                        });
}

Var concat(std::span<const Var> parts) {
  require(!parts.empty(), "concat", "no inputs");
  std::vector<double> data;
  for (Var p : parts) {
    const auto& d = p.value().data;
    data.insert(data.end(), d.begin(), d.end());
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape->record(
      Tensor::vector(std::move(data)), parts,
      [inputs](Tape& t, const Tensor&, const Tensor& g) {
        std::size_t off = 0;
        for (Var p : inputs) {
          const std::size_t n = p.value().size();
          if (Tensor* gp = t.accumulator(p))
            for (std::size_t i = 0; i < n; ++i) (*gp)[i] += g[off + i];
          off += n;
        }
      });
}

Var vconcat(std::span<const Var> parts) {
  require(!parts.empty(), "vconcat", "no inputs");
  const std::size_t cols = parts[0].value().cols;
  std::size_t rows = 0;
  std::vector<double> data;
  for (Var p : parts) {
    const Tensor& v = p.value();
    require(v.cols == cols, "vconcat", "column count mismatch");
    rows += v.rows;
    data.insert(data.end(), v.data.begin(), v.data.end());
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape->record(
      Tensor(rows, cols, std::move(data)), parts,
      [inputs](Tape& t, const Tensor&, const Tensor& g) {
        std::size_t off = 0;
        for (Var p : inputs) {
          const std::size_t n = p.value().size();
          if (Tensor* gp = t.accumulator(p))
            for (std::size_t i = 0; i < n; ++i) (*gp)[i] += g[off + i];
          off += n;
        }
      });
}

Var matmul(Var a, Var b, bool trans_a, bool trans_b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const std::size_t m = trans_a ? x.cols : x.rows;
  const std::size_t k = trans_a ? x.rows : x.cols;
  const std::size_t k2 = trans_b ? y.cols : y.rows;
  const std::size_t n = trans_b ? y.rows : y.cols;
  require(k == k2, "matmul",
          "inner dimension mismatch " + shape(x) + (trans_a ? "^T" : "") +
              " * " + shape(y) + (trans_b ? "^T" : ""));
  Tensor out(m, n);
  gemm_acc(trans_a, trans_b, x, y, out);
  return a.tape->record(
      std::move(out), {a, b},
      [a, b, trans_a, trans_b](Tape& t, const Tensor&, const Tensor& g) {
        const Tensor& x = a.value();
        const Tensor& y = b.value();
        if (Tensor* ga = t.accumulator(a)) {
          if (!trans_a)
            gemm_acc(false, !trans_b, g, y, *ga);  // G op(B)^T
          else
            gemm_acc(trans_b, true, y, g, *ga);  // op(B) G^T
        }
        if (Tensor* gb = t.accumulator(b)) {
          if (!trans_b)
            gemm_acc(!trans_a, false, x, g, *gb);  // op(A)^T G
          else
            gemm_acc(true, trans_a, g, x, *gb);  // G^T op(A)
        }
      });
}

Var add_row_broadcast(Var m, Var b) {
  const Tensor& x = m.value();
  const Tensor& v = b.value();
  require(v.size() == x.cols, "add_row_broadcast", "bias length mismatch");
  Tensor out = x;
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols; ++c) out(r, c) += v[c];
  return m.tape->record(std::move(out), {m, b},
                        [m, b](Tape& t, const Tensor&, const Tensor& g) {
                          if (Tensor* gm = t.accumulator(m))
                            for (std::size_t i = 0; i < g.size(); ++i)
                              (*gm)[i] += g[i];
                          if (Tensor* gb = t.accumulator(b))
                            for (std::size_t r = 0; r < g.rows; ++r)
                              for (std::size_t c = 0; c < g.cols; ++c)
                                (*gb)[c] += g(r, c);
                        });
}

Var mean_rows(Var m) {
  const Tensor& x = m.value();
  require(x.rows > 0, "mean_rows", "empty matrix");
  Tensor out(x.cols, 1);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols; ++c) out[c] += x(r, c);
  const double inv = 1.0 / static_cast<double>(x.rows);
  for (double& v : out.data) v *= inv;
  return m.tape->record(std::move(out), {m},
                        [m, inv](Tape& t, const Tensor&, const Tensor& g) {
                          Tensor& gm = *t.accumulator(m);
                          for (std::size_t r = 0; r < gm.rows; ++r)
                            for (std::size_t c = 0; c < gm.cols; ++c)
                              gm(r, c) += inv * g[c];
                        });
}

Var gather_rows(Var table, std::span<const std::int64_t> idx) {
  const Tensor& x = table.value();
  Tensor out(idx.size(), x.cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] == kZeroRow) continue;
    require(idx[i] >= 0 && static_cast<std::size_t>(idx[i]) < x.rows,
            "gather_rows", "row index out of range");
    const auto src = x.row(static_cast<std::size_t>(idx[i]));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  std::vector<std::int64_t> ids(idx.begin(), idx.end());
  return table.tape->record(
      std::move(out), {table},
      [table, ids = std::move(ids)](Tape& t, const Tensor&, const Tensor& g) {
        Tensor& gt = *t.accumulator(table);
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (ids[i] == kZeroRow) continue;
          auto dst = gt.row(static_cast<std::size_t>(ids[i]));
          const auto src = g.row(i);
          for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
        }
      });
}

Var gather(Var v, std::span<const std::size_t> idx) {
  const Tensor& x = v.value();
  Tensor out(idx.size(), 1);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] < x.size(), "gather", "index out of range");
    out[i] = x[idx[i]];
  }
  std::vector<std::size_t> ids(idx.begin(), idx.end());
  return v.tape->record(
      std::move(out), {v},
      [v, ids = std::move(ids)](Tape& t, const Tensor&, const Tensor& g) {
        Tensor& gv = *t.accumulator(v);
        for (std::size_t i = 0; i < ids.size(); ++i) gv[ids[i]] += g[i];
      });
}

Var scale_rows(Var m, Var w) {
  const Tensor& x = m.value();
  const Tensor& s = w.value();
  require(s.size() == x.rows, "scale_rows", "weight count != rows");
  Tensor out(x.rows, x.cols);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols; ++c) out(r, c) = s[r] * x(r, c);
  return m.tape->record(std::move(out), {m, w},
                        [m, w](Tape& t, const Tensor&, const Tensor& g) {
                          const Tensor& x = m.value();
                          const Tensor& s = w.value();
                          if (Tensor* gm = t.accumulator(m))
                            for (std::size_t r = 0; r < x.rows; ++r)
                              for (std::size_t c = 0; c < x.cols; ++c)
                                (*gm)(r, c) += s[r] * g(r, c);
                          if (Tensor* gw = t.accumulator(w))
                            for (std::size_t r = 0; r < x.rows; ++r) {
                              double d = 0.0;
                              for (std::size_t c = 0; c < x.cols; ++c)
                                d += g(r, c) * x(r, c);
                              (*gw)[r] += d;
                            }
                        });
}

Var block_mean(Var m, std::size_t blocks) {
  const Tensor& x = m.value();
  require(blocks > 0 && x.cols % blocks == 0, "block_mean",
          "columns not divisible by block count");
  const std::size_t width = x.cols / blocks;
  const double inv = 1.0 / static_cast<double>(blocks);
  Tensor out(x.rows, width);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t b = 0; b < blocks; ++b)
      for (std::size_t c = 0; c < width; ++c)
        out(r, c) += inv * x(r, b * width + c);
  return m.tape->record(
      std::move(out), {m},
      [m, blocks, width, inv](Tape& t, const Tensor&, const Tensor& g) {
        Tensor& gm = *t.accumulator(m);
        for (std::size_t r = 0; r < gm.rows; ++r)
          for (std::size_t b = 0; b < blocks; ++b)
            for (std::size_t c = 0; c < width; ++c)
              gm(r, b * width + c) += inv * g(r, c);
      });
}

Var cross_entropy(Var logits, std::size_t target) {
  const Tensor& x = logits.value();
  require(target < x.size(), "cross_entropy", "target out of range");
  if (!all_finite(x.data)) throw numeric_error("cross_entropy: non-finite logits");
  const double mx = *std::max_element(x.data.begin(), x.data.end());
  double z = 0.0;
  for (double v : x.data) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  return logits.tape->record(
      Tensor(1, 1, lse - x[target]), {logits},
      [logits, target, lse](Tape& t, const Tensor&, const Tensor& g) {
        const Tensor& x = logits.value();
        Tensor& gl = *t.accumulator(logits);
        for (std::size_t i = 0; i < x.size(); ++i)
          gl[i] += g[0] * std::exp(x[i] - lse);
        gl[target] -= g[0];
      });
}

GradCheckResult grad_check(const Program& f, std::vector<Tensor>& params,
                           double h) {
  if (!(h > 0.0)) throw usage_error("grad_check: h must be positive");
  auto evaluate = [&]() {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(params.size());
    for (const auto& p : params) leaves.push_back(tape.leaf(p, false));
    const double v = f(tape, leaves).scalar();
    if (!std::isfinite(v)) throw numeric_error("grad_check: non-finite objective");
    return v;
  };

  Tape tape;
  std::vector<Var> leaves;
  for (const auto& p : params) leaves.push_back(tape.leaf(p, true));
  Var loss = f(tape, leaves);
  if (!std::isfinite(loss.scalar()))
    throw numeric_error("grad_check: non-finite objective");
  tape.backward(loss);

  GradCheckResult res;
  res.per_param.assign(params.size(), 0.0);
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Tensor& analytic = tape.grad(leaves[p]);
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double orig = params[p][i];
      params[p][i] = orig + h;
      const double fp = evaluate();
      params[p][i] = orig - h;
      const double fm = evaluate();
      params[p][i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      res.per_param[p] = std::max(res.per_param[p], err);
    }
    res.max_rel_err = std::max(res.max_rel_err, res.per_param[p]);
  }
  return res;
}

}  // namespace dkg::ad
