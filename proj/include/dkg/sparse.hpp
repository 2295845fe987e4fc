#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dkg/tensor.hpp"

namespace dkg {

/// Row-compressed sparse matrix whose stored entries are all exactly 1.
///
/// Only the structure (row pointers and column indices) is kept; the value of
/// every stored entry is implicitly 1. This is the storage behind the reified
/// head/relation/tail matrices.
class BinaryCsr {
 public:
  BinaryCsr() : row_ptr_{0} {}
  BinaryCsr(std::size_t cols, std::vector<std::uint64_t> row_ptr,
            std::vector<std::uint32_t> col_idx);

  /// One stored entry per row, at the given column.
  static BinaryCsr one_hot_rows(std::size_t cols,
                                std::vector<std::uint32_t> row_cols);

  std::size_t rows() const noexcept { return row_ptr_.size() - 1; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return col_idx_.size(); }

  std::span<const std::uint32_t> row(std::size_t r) const {
    return {col_idx_.data() + row_ptr_[r], col_idx_.data() + row_ptr_[r + 1]};
  }
  std::span<const std::uint64_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const std::uint32_t> col_idx() const noexcept { return col_idx_; }

  /// out = M v  (length rows())
  void apply(std::span<const double> v, std::span<double> out) const;
  /// out += M^T v  (length cols())
  void apply_transpose_add(std::span<const double> v,
                           std::span<double> out) const;

  Tensor to_dense() const;
  std::size_t memory_bytes() const noexcept {
    return row_ptr_.capacity() * sizeof(std::uint64_t) +
           col_idx_.capacity() * sizeof(std::uint32_t);
  }

 private:
  std::size_t cols_ = 0;
  std::vector<std::uint64_t> row_ptr_;
  std::vector<std::uint32_t> col_idx_;
};

}  // namespace dkg
