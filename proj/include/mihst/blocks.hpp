#pragma once

// Parameter containers and the attention/feed-forward building blocks shared
// by the encoders and the fusion transformer.

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mihst/ops.hpp"
#include "mihst/tensor.hpp"

namespace mihst {

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

class ParamInit {
 public:
  explicit ParamInit(std::uint64_t seed) : rng_(seed) {}
  Tensor normal(std::size_t rows, std::size_t cols, double stddev);
  // N(0, 1/fan_in) with fan_in = rows.
  Tensor fan_in(std::size_t rows, std::size_t cols);
  Tensor constant(std::size_t rows, std::size_t cols, double value);
  // Rows linearly interpolated between N(0, stddev) anchor rows placed every
  // `spacing` rows, so neighbouring rows start out similar.
  Tensor smooth(std::size_t rows, std::size_t cols, double stddev, std::size_t spacing);

 private:
  std::mt19937_64 rng_;
};

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [1 x out]

  static Linear init(ParamInit& init, std::size_t in, std::size_t out);
  Tensor operator()(const Tensor& x) const { return add_row(matmul(x, weight), bias); }
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Multi-head attention projections; head h uses columns [h*d_h, (h+1)*d_h).
struct MultiHeadAttention {
  std::size_t heads = 1;
  Tensor wq, wk, wv, wo;  // [dim x dim]

  static MultiHeadAttention init(ParamInit& init, std::size_t dim, std::size_t heads);
  // Scaled dot-product attention of `queries` over `keys_values`.
  Tensor operator()(const Tensor& queries, const Tensor& keys_values,
                    const AttentionMask& mask) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

enum class NormPlacement { pre, post };

// Self-attention + GELU feed-forward, each with a residual and LayerNorm.
struct TransformerBlock {
  MultiHeadAttention attn;
  Tensor ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
  Linear ff_in, ff_out;

  static TransformerBlock init(ParamInit& init, std::size_t dim, std::size_t heads,
                               std::size_t ffn_dim);

  // All rows of x attend under `mask`.
  Tensor forward(const Tensor& x, const AttentionMask& mask, NormPlacement norm) const;
  // Post-norm output for the first row of x only (a readout position),
  // attending over all rows of x allowed by `key_mask`.
  Tensor forward_first_row(const Tensor& x, const AttentionMask& key_mask) const;

  void collect(const std::string& prefix, NamedParams& out) const;
};

}  // namespace mihst
