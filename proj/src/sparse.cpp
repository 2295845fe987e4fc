#include "dkg/sparse.hpp"

#include <numeric>
#include <string>

#include "dkg/error.hpp"

namespace dkg {

BinaryCsr::BinaryCsr(std::size_t cols, std::vector<std::uint64_t> row_ptr,
                     std::vector<std::uint32_t> col_idx)
    : cols_(cols), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)) {
  if (row_ptr_.empty() || row_ptr_.front() != 0 ||
      row_ptr_.back() != col_idx_.size())
    throw data_error("BinaryCsr: inconsistent row pointers");
  for (std::size_t r = 0; r + 1 < row_ptr_.size(); ++r)
    if (row_ptr_[r] > row_ptr_[r + 1])
      throw data_error("BinaryCsr: row pointers not monotone");
  for (auto c : col_idx_)
    if (c >= cols_)
      throw data_error("BinaryCsr: column index " + std::to_string(c) +
                       " out of range " + std::to_string(cols_));
}

BinaryCsr BinaryCsr::one_hot_rows(std::size_t cols,
                                  std::vector<std::uint32_t> row_cols) {
  std::vector<std::uint64_t> ptr(row_cols.size() + 1);
  std::iota(ptr.begin(), ptr.end(), std::uint64_t{0});
  return BinaryCsr(cols, std::move(ptr), std::move(row_cols));
}

void BinaryCsr::apply(std::span<const double> v, std::span<double> out) const {
  const std::size_t n = rows();
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += v[col_idx_[k]];
    out[r] = s;
  }
}

void BinaryCsr::apply_transpose_add(std::span<const double> v,
                                    std::span<double> out) const {
  const std::size_t n = rows();
  for (std::size_t r = 0; r < n; ++r) {
    const double x = v[r];
    if (x == 0.0) continue;
    for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) out[col_idx_[k]] += x;
  }
}

Tensor BinaryCsr::to_dense() const {
  Tensor t(rows(), cols_);
  for (std::size_t r = 0; r < rows(); ++r)
    for (auto c : row(r)) t(r, c) = 1.0;
  return t;
}

}  // namespace dkg
