#include "mihst/blocks.hpp"

#include <algorithm>
#include <cmath>

namespace mihst {

Tensor ParamInit::normal(std::size_t rows, std::size_t cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = dist(rng_);
  return Tensor::from_data({rows, cols}, std::move(v), true);
}

Tensor ParamInit::fan_in(std::size_t rows, std::size_t cols) {
  return normal(rows, cols, 1.0 / std::sqrt(static_cast<double>(rows)));
}

Tensor ParamInit::constant(std::size_t rows, std::size_t cols, double value) {
  return Tensor::from_data({rows, cols}, std::vector<double>(rows * cols, value), true);
}

Tensor ParamInit::smooth(std::size_t rows, std::size_t cols, double stddev, std::size_t spacing) {
  spacing = std::max<std::size_t>(spacing, 1);
  const std::size_t anchors = (rows + spacing - 1) / spacing + 1;
  const Tensor a = normal(anchors, cols, stddev);
  std::vector<double> v(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t k = r / spacing;
    const double w = static_cast<double>(r % spacing) / static_cast<double>(spacing);
    for (std::size_t c = 0; c < cols; ++c) v[r * cols + c] = (1.0 - w) * a(k, c) + w * a(k + 1, c);
  }
  return Tensor::from_data({rows, cols}, std::move(v), true);
}

Linear Linear::init(ParamInit& init, std::size_t in, std::size_t out) {
  return {init.fan_in(in, out), init.constant(1, out, 0.0)};
}

void Linear::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

MultiHeadAttention MultiHeadAttention::init(ParamInit& init, std::size_t dim,
                                            std::size_t heads) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("attention width " + std::to_string(dim) +
                      " is not divisible by head count " + std::to_string(heads));
  }
  MultiHeadAttention m;
  m.heads = heads;
  m.wq = init.fan_in(dim, dim);
  m.wk = init.fan_in(dim, dim);
  m.wv = init.fan_in(dim, dim);
  m.wo = init.fan_in(dim, dim);
  return m;
}

Tensor MultiHeadAttention::operator()(const Tensor& queries, const Tensor& keys_values,
                                      const AttentionMask& mask) const {
  const std::size_t dim = wq.cols();
  const std::size_t dh = dim / heads;
  const Tensor q = matmul(queries, wq);
  const Tensor k = matmul(keys_values, wk);
  const Tensor v = matmul(keys_values, wv);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = slice_cols(q, h * dh, dh);
    const Tensor kh = slice_cols(k, h * dh, dh);
    const Tensor vh = slice_cols(v, h * dh, dh);
    const Tensor weights = masked_softmax(scale(matmul_nt(qh, kh), inv_sqrt), mask);
    outs.push_back(matmul(weights, vh));
  }
  return matmul(heads == 1 ? outs[0] : concat_cols(outs), wo);
}

void MultiHeadAttention::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".wq", wq);
  out.emplace_back(prefix + ".wk", wk);
  out.emplace_back(prefix + ".wv", wv);
  out.emplace_back(prefix + ".wo", wo);
}

TransformerBlock TransformerBlock::init(ParamInit& init, std::size_t dim, std::size_t heads,
                                        std::size_t ffn_dim) {
  TransformerBlock b;
  b.attn = MultiHeadAttention::init(init, dim, heads);
  b.ln1_gamma = init.constant(1, dim, 1.0);
  b.ln1_beta = init.constant(1, dim, 0.0);
  b.ln2_gamma = init.constant(1, dim, 1.0);
  b.ln2_beta = init.constant(1, dim, 0.0);
  b.ff_in = Linear::init(init, dim, ffn_dim);
  b.ff_out = Linear::init(init, ffn_dim, dim);
  return b;
}

Tensor TransformerBlock::forward(const Tensor& x, const AttentionMask& mask,
                                 NormPlacement norm) const {
  if (norm == NormPlacement::pre) {
    const Tensor xn = layer_norm(x, ln1_gamma, ln1_beta);
    const Tensor y = add(x, attn(xn, xn, mask));
    return add(y, ff_out(gelu(ff_in(layer_norm(y, ln2_gamma, ln2_beta)))));
  }
  const Tensor y = layer_norm(add(x, attn(x, x, mask)), ln1_gamma, ln1_beta);
  return layer_norm(add(y, ff_out(gelu(ff_in(y)))), ln2_gamma, ln2_beta);
}

Tensor TransformerBlock::forward_first_row(const Tensor& x, const AttentionMask& key_mask) const {
  const Tensor first = slice_rows(x, 0, 1);
  const Tensor y = layer_norm(add(first, attn(first, x, key_mask)), ln1_gamma, ln1_beta);
  return layer_norm(add(y, ff_out(gelu(ff_in(y)))), ln2_gamma, ln2_beta);
}

void TransformerBlock::collect(const std::string& prefix, NamedParams& out) const {
  attn.collect(prefix + ".attn", out);
  out.emplace_back(prefix + ".ln1.gamma", ln1_gamma);
  out.emplace_back(prefix + ".ln1.beta", ln1_beta);
  out.emplace_back(prefix + ".ln2.gamma", ln2_gamma);
  out.emplace_back(prefix + ".ln2.beta", ln2_beta);
  ff_in.collect(prefix + ".ff_in", out);
  ff_out.collect(prefix + ".ff_out", out);
}

}  // namespace mihst
