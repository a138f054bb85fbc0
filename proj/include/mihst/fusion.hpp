#pragma once

// Fusion core: timestamp max-pooling of lab embeddings, causal event-level
// transformer, label-wise attention masked to the first t positions, and
// the per-label projection + sigmoid head.

#include <span>
#include <vector>

#include "mihst/blocks.hpp"

namespace mihst {

struct FusionConfig {
  std::size_t dim = 32;  // D_textual
  std::size_t heads = 4;  // h_f
  std::size_t layers = 2;  // K
  std::size_t labels = 10;  // L
  std::size_t ffn_dim = 64;
  bool label_bias = false;
};

struct FusionParams {
  FusionConfig cfg;
  std::vector<TransformerBlock> layers;
  Tensor label_queries;  // Q [L x dim]
  MultiHeadAttention label_attn;
  Tensor label_proj;  // W [L x dim], row l projects D_{t,l}
  Tensor label_bias;  // [1 x L], only when cfg.label_bias

  static FusionParams init(const FusionConfig& cfg, ParamInit& init);
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct PooledLabs {
  Tensor rows;  // [P x dim]
  std::vector<double> times;  // ascending, distinct
  std::vector<std::vector<std::size_t>> groups;  // input rows per pooled row
};

// Groups rows by exactly equal timestamps and takes the elementwise max of
// each group. M = 0 gives P = 0.
PooledLabs pool_by_timestamp(const Tensor& lab_embeddings, std::span<const double> times);

// K pre-norm transformer layers under a lower-triangular mask; row i of the
// result depends on rows 0..i of `events` only. Throws on an empty sequence.
Tensor causal_encode(const FusionParams& p, const Tensor& events);

// Label-specific context D_t [L x dim] from positions 1..t (1-based) of H.
Tensor labelwise_attend(const FusionParams& p, const Tensor& hidden, std::size_t t);

// Per-position logits [n x L]: row t-1 holds W_l . D_{t,l} (+ bias).
Tensor temporal_logits(const FusionParams& p, const Tensor& hidden);

// sigmoid(temporal_logits): probabilities for every label at every position.
Tensor predict_temporal(const FusionParams& p, const Tensor& hidden);

}  // namespace mihst
