#include "mihst/fusion.hpp"

#include <cmath>
#include <map>

namespace mihst {

FusionParams FusionParams::init(const FusionConfig& cfg, ParamInit& init) {
  if (cfg.labels == 0) throw ConfigError("label count must be positive");
  FusionParams p;
  p.cfg = cfg;
  for (std::size_t k = 0; k < cfg.layers; ++k) {
    p.layers.push_back(TransformerBlock::init(init, cfg.dim, cfg.heads, cfg.ffn_dim));
  }
  p.label_queries = init.normal(cfg.labels, cfg.dim, 1.0);
  p.label_attn = MultiHeadAttention::init(init, cfg.dim, cfg.heads);
  p.label_proj = init.normal(cfg.labels, cfg.dim, 1.0 / std::sqrt(static_cast<double>(cfg.dim)));
  if (cfg.label_bias) p.label_bias = init.constant(1, cfg.labels, 0.0);
  return p;
}

void FusionParams::collect(const std::string& prefix, NamedParams& out) const {
  for (std::size_t k = 0; k < layers.size(); ++k) {
    layers[k].collect(prefix + ".layer" + std::to_string(k), out);
  }
  out.emplace_back(prefix + ".label_queries", label_queries);
  label_attn.collect(prefix + ".label_attn", out);
  out.emplace_back(prefix + ".label_proj", label_proj);
  if (label_bias.defined()) out.emplace_back(prefix + ".label_bias", label_bias);
}

PooledLabs pool_by_timestamp(const Tensor& lab_embeddings, std::span<const double> times) {
  const std::size_t m = times.size();
  if (m != 0 && lab_embeddings.rows() != m) {
    throw DimensionError("pool_by_timestamp: " + std::to_string(lab_embeddings.rows()) +
                         " rows for " + std::to_string(m) + " timestamps");
  }
  PooledLabs out;
  const std::size_t d = m ? lab_embeddings.cols() : (lab_embeddings.defined() ? lab_embeddings.cols() : 0);
  if (m == 0) {
    out.rows = Tensor::zeros({0, d});
    return out;
  }
  std::map<double, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < m; ++i) groups[times[i]].push_back(i);
  std::vector<Tensor> pooled;
  pooled.reserve(groups.size());
  for (auto& [t, members] : groups) {
    std::vector<Tensor> rows;
    rows.reserve(members.size());
    for (auto i : members) rows.push_back(slice_rows(lab_embeddings, i, 1));
    pooled.push_back(rowgroup_max(rows.size() == 1 ? rows[0] : concat_rows(rows)));
    out.times.push_back(t);
    out.groups.push_back(std::move(members));
  }
  out.rows = pooled.size() == 1 ? pooled[0] : concat_rows(pooled);
  return out;
}

Tensor causal_encode(const FusionParams& p, const Tensor& events) {
  if (!events.defined() || events.rows() == 0) throw Error("causal_encode: empty event sequence");
  if (events.cols() != p.cfg.dim) {
    throw DimensionError("causal_encode: event width " + std::to_string(events.cols()) +
                         " != model width " + std::to_string(p.cfg.dim));
  }
  const AttentionMask mask = AttentionMask::causal(events.rows());
  Tensor h = events;
  for (const auto& layer : p.layers) h = layer.forward(h, mask, NormPlacement::pre);
  return h;
}

namespace {

// Projections of Q and H shared by every time step; attention for step t
// reuses them with its own mask, which gives the same numbers as computing
// labelwise_attend(p, H, t) from scratch.
struct LabelContext {
  std::vector<Tensor> scores;  // per head [L x n], already scaled
  std::vector<Tensor> values;  // per head [n x d_h]
};

LabelContext label_context(const FusionParams& p, const Tensor& hidden) {
  const auto& a = p.label_attn;
  const std::size_t dh = p.cfg.dim / a.heads;
  const Tensor q = matmul(p.label_queries, a.wq);
  const Tensor k = matmul(hidden, a.wk);
  const Tensor v = matmul(hidden, a.wv);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  LabelContext ctx;
  for (std::size_t h = 0; h < a.heads; ++h) {
    ctx.scores.push_back(
        scale(matmul_nt(slice_cols(q, h * dh, dh), slice_cols(k, h * dh, dh)), inv_sqrt));
    ctx.values.push_back(slice_cols(v, h * dh, dh));
  }
  return ctx;
}

Tensor attend_at(const FusionParams& p, const LabelContext& ctx, std::size_t n, std::size_t t) {
  // a_t: same open prefix 1..t for every label row.
  const AttentionMask mask = AttentionMask::prefix(n, t);
  std::vector<Tensor> heads;
  heads.reserve(ctx.scores.size());
  for (std::size_t h = 0; h < ctx.scores.size(); ++h) {
    heads.push_back(matmul(masked_softmax(ctx.scores[h], mask), ctx.values[h]));
  }
  return matmul(heads.size() == 1 ? heads[0] : concat_cols(heads), p.label_attn.wo);
}

void check_hidden(const FusionParams& p, const Tensor& hidden) {
  if (!hidden.defined() || hidden.rows() == 0) throw Error("empty hidden sequence");
  if (hidden.cols() != p.cfg.dim) {
    throw DimensionError("hidden width " + std::to_string(hidden.cols()) +
                         " != model width " + std::to_string(p.cfg.dim));
  }
}

}  // namespace

Tensor labelwise_attend(const FusionParams& p, const Tensor& hidden, std::size_t t) {
  check_hidden(p, hidden);
  const std::size_t n = hidden.rows();
  if (t < 1 || t > n) {
    throw Error("time position " + std::to_string(t) + " outside [1, " + std::to_string(n) + "]");
  }
  return attend_at(p, label_context(p, hidden), n, t);
}

Tensor temporal_logits(const FusionParams& p, const Tensor& hidden) {
  check_hidden(p, hidden);
  const std::size_t n = hidden.rows();
  const std::size_t labels = p.cfg.labels;
  const LabelContext ctx = label_context(p, hidden);
  std::vector<Tensor> rows;
  rows.reserve(n);
  for (std::size_t t = 1; t <= n; ++t) {
    const Tensor d_t = attend_at(p, ctx, n, t);
    Tensor logits = reshape(rowwise_dot(d_t, p.label_proj), {1, labels});
    if (p.label_bias.defined()) logits = add(logits, p.label_bias);
    rows.push_back(std::move(logits));
  }
  return rows.size() == 1 ? rows[0] : concat_rows(rows);
}

Tensor predict_temporal(const FusionParams& p, const Tensor& hidden) {
  return sigmoid(temporal_logits(p, hidden));
}

}  // namespace mihst
