#include "mihst/encoders.hpp"

#include <cctype>
#include <cmath>

#include "mihst/binning.hpp"

namespace mihst {
namespace {

Tensor sinusoid(std::size_t positions, std::size_t dim) {
  std::vector<double> pe(positions * dim);
  for (std::size_t p = 0; p < positions; ++p) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double rate =
          std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double a = static_cast<double>(p) * rate;
      pe[p * dim + i] = (i % 2 == 0) ? std::sin(a) : std::cos(a);
    }
  }
  return Tensor::from_data({positions, dim}, std::move(pe));
}

}  // namespace

NoteEncoderParams NoteEncoderParams::init(const NoteEncoderConfig& cfg, ParamInit& init) {
  NoteEncoderParams p;
  p.cfg = cfg;
  p.token_embedding = init.normal(cfg.vocab_size, cfg.dim, 1.0);
  p.cls = init.normal(1, cfg.dim, 1.0);
  p.block = TransformerBlock::init(init, cfg.dim, cfg.heads, cfg.ffn_dim);
  return p;
}

void NoteEncoderParams::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".token_embedding", token_embedding);
  out.emplace_back(prefix + ".cls", cls);
  block.collect(prefix + ".block", out);
}

Tensor encode_note_chunk(const NoteEncoderParams& p, std::span<const std::size_t> tokens) {
  if (tokens.empty()) throw Error("note chunk has no tokens");
  if (tokens.size() > p.cfg.max_tokens) {
    throw Error("note chunk has " + std::to_string(tokens.size()) + " tokens, limit is " +
                std::to_string(p.cfg.max_tokens));
  }
  for (auto t : tokens) {
    if (t >= p.cfg.vocab_size) {
      throw Error("token id " + std::to_string(t) + " outside note vocabulary of size " +
                  std::to_string(p.cfg.vocab_size));
    }
  }
  const Tensor parts[] = {p.cls, gather_rows(p.token_embedding, tokens)};
  Tensor x = concat_rows(parts);
  if (p.cfg.position_encoding) x = add(x, sinusoid(x.rows(), p.cfg.dim));
  return p.block.forward_first_row(x, AttentionMask::keys(std::vector<bool>(x.rows(), true)));
}

// ---------------------------------------------------------------------------

NameVocabulary::NameVocabulary(std::span<const std::string> feature_names) {
  std::vector<std::string> words;
  for (const auto& n : feature_names)
    for (auto& w : split(n)) words.push_back(std::move(w));
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  *this = from_words(std::move(words));
}

NameVocabulary NameVocabulary::from_words(std::vector<std::string> words) {
  NameVocabulary v;
  v.words_ = std::move(words);
  for (std::size_t i = 0; i < v.words_.size(); ++i) v.ids_[v.words_[i]] = i + 2;
  return v;
}

std::vector<std::string> NameVocabulary::split(const std::string& name) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : name) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::size_t> NameVocabulary::encode(const std::string& name,
                                                std::size_t max_tokens) const {
  std::vector<std::size_t> ids;
  for (const auto& w : split(name)) {
    if (ids.size() == max_tokens) break;
    auto it = ids_.find(w);
    ids.push_back(it == ids_.end() ? kUnknown : it->second);
  }
  if (ids.empty() && max_tokens > 0) ids.push_back(kUnknown);
  return ids;
}

TabularEncoderParams TabularEncoderParams::init(const TabularEncoderConfig& cfg, ParamInit& init) {
  TabularEncoderParams p;
  p.cfg = cfg;
  p.name_embedding = init.normal(cfg.name_vocab_size, cfg.dim, 1.0);
  p.bin_embedding = init.smooth(kNumBins, cfg.dim, 1.0, 32);
  p.cls = init.normal(1, cfg.dim, 1.0);
  p.block = TransformerBlock::init(init, cfg.dim, cfg.heads, cfg.ffn_dim);
  return p;
}

void TabularEncoderParams::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".name_embedding", name_embedding);
  out.emplace_back(prefix + ".bin_embedding", bin_embedding);
  out.emplace_back(prefix + ".cls", cls);
  block.collect(prefix + ".block", out);
}

LabTokens lab_token_matrix(const TabularEncoderParams& p,
                           std::span<const std::size_t> name_tokens, int bin, double x_norm) {
  if (bin < 1 || bin > kNumBins) {
    throw Error("bin " + std::to_string(bin) + " outside [1, 256]");
  }
  if (!(x_norm >= 0.0 && x_norm <= 1.0)) {
    throw Error("normalized lab value " + std::to_string(x_norm) + " outside [0, 1]");
  }
  const std::size_t f = p.cfg.name_tokens;
  std::vector<std::size_t> ids(f, NameVocabulary::kPad);
  LabTokens out;
  out.key_mask.assign(f + 2, false);
  out.key_mask[0] = true;
  out.key_mask[f + 1] = true;
  for (std::size_t i = 0; i < std::min(f, name_tokens.size()); ++i) {
    if (name_tokens[i] >= p.cfg.name_vocab_size) {
      throw Error("name token id " + std::to_string(name_tokens[i]) + " out of range");
    }
    ids[i] = name_tokens[i];
    out.key_mask[i + 1] = true;
  }
  const std::size_t bin_row[] = {static_cast<std::size_t>(bin - 1)};
  const Tensor parts[] = {p.cls, gather_rows(p.name_embedding, ids),
                          scale(gather_rows(p.bin_embedding, bin_row), x_norm)};
  out.rows = concat_rows(parts);
  return out;
}

Tensor encode_lab_event(const TabularEncoderParams& p, std::span<const std::size_t> name_tokens,
                        int bin, double x_norm) {
  LabTokens u = lab_token_matrix(p, name_tokens, bin, x_norm);
  return p.block.forward_first_row(u.rows, AttentionMask::keys(std::move(u.key_mask)));
}

// ---------------------------------------------------------------------------

ModalityMapperParams ModalityMapperParams::init(std::size_t tab_dim, std::size_t text_dim,
                                                double negative_slope, ParamInit& init) {
  ModalityMapperParams p;
  p.weight = init.fan_in(tab_dim, text_dim);
  p.bias = init.constant(1, text_dim, 0.0);
  p.negative_slope = negative_slope;
  return p;
}

void ModalityMapperParams::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

Tensor map_modality(const ModalityMapperParams& p, const Tensor& u) {
  if (u.cols() != p.weight.rows()) {
    throw DimensionError("map_modality: input width " + std::to_string(u.cols()) +
                         " does not match tabular dimension " +
                         std::to_string(p.weight.rows()));
  }
  return leaky_relu(add_row(matmul(u, p.weight), p.bias), p.negative_slope);
}

}  // namespace mihst
