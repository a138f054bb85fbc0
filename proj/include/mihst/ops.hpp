#pragma once

// Differentiable tensor ops. Inputs are treated as matrices (see
// Tensor::rows/cols); results are rank 2 unless stated otherwise.

#include <cstddef>
#include <span>
#include <vector>

#include "mihst/tensor.hpp"

namespace mihst {

// Which (row, column) score entries may receive attention weight. A mask
// with one row is broadcast over all score rows.
class AttentionMask {
 public:
  AttentionMask(std::size_t rows, std::size_t cols, std::vector<bool> allow);

  // Same key mask for every row.
  static AttentionMask keys(std::vector<bool> allow);
  // Row i may attend to columns 0..i (inclusive).
  static AttentionMask causal(std::size_t n);
  // Columns 0..visible-1 open, the rest closed; broadcast over rows.
  static AttentionMask prefix(std::size_t n, std::size_t visible);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool allowed(std::size_t row, std::size_t col) const {
    return allow_[(rows_ == 1 ? 0 : row) * cols_ + col];
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<bool> allow_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
// a * b^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
// x[r x c] + bias[1 x c] broadcast over rows.
Tensor add_row(const Tensor& x, const Tensor& bias);
// Per-row dot product of equally shaped a and b: [r x 1].
Tensor rowwise_dot(const Tensor& a, const Tensor& b);

Tensor sigmoid(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double negative_slope = 0.01);
// tanh approximation
Tensor gelu(const Tensor& x);

// Row-wise softmax over allowed entries; masked entries are exactly 0.
// Throws "empty attention context" when a row has no allowed entry.
Tensor masked_softmax(const Tensor& scores, const AttentionMask& mask);
Tensor masked_softmax(const Tensor& scores, const std::vector<bool>& mask);

// Row-wise layer normalization with affine gamma/beta [1 x c].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// Elementwise max over the rows of a [g x d] tensor -> [1 x d]. The gradient
// of each column goes to the first row attaining the max.
Tensor rowgroup_max(const Tensor& rows);

// table[ids[i]] for each i -> [ids.size() x c]. Backward scatter-adds.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor reshape(const Tensor& x, Shape shape);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

}  // namespace mihst
