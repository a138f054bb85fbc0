#pragma once

// Event encoders: note chunks -> [1 x D_textual] and lab measurements ->
// [1 x D_tabular], each a single randomly initialized transformer block read
// out at a leading [CLS] position, plus the tabular-to-textual mapper.

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mihst/blocks.hpp"

namespace mihst {

struct NoteEncoderConfig {
  std::size_t vocab_size = 512;
  std::size_t dim = 32;         // D_textual
  std::size_t heads = 4;
  std::size_t max_tokens = 32;  // T
  std::size_t ffn_dim = 64;
  // Sinusoidal positions on the token sequence. Off makes the encoder
  // invariant to token order.
  bool position_encoding = true;
};

struct NoteEncoderParams {
  NoteEncoderConfig cfg;
  Tensor token_embedding;  // [vocab_size x dim]
  Tensor cls;              // [1 x dim]
  TransformerBlock block;

  static NoteEncoderParams init(const NoteEncoderConfig& cfg, ParamInit& init);
  void collect(const std::string& prefix, NamedParams& out) const;
};

// [1 x D_textual] readout at CLS of [CLS, tokens...]. Throws on an empty or
// over-long chunk or an out-of-vocabulary token id.
Tensor encode_note_chunk(const NoteEncoderParams& p, std::span<const std::size_t> tokens);

// The first `limit` items in time order (stable for equal times).
template <typename Item>
std::vector<Item> select_chunks(std::vector<Item> chunks, std::size_t limit) {
  std::stable_sort(chunks.begin(), chunks.end(),
                   [](const Item& a, const Item& b) { return a.time < b.time; });
  if (chunks.size() > limit) chunks.resize(limit);
  return chunks;
}

// Word-level vocabulary over lab feature names. Id 0 pads, id 1 is unknown.
class NameVocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnknown = 1;

  NameVocabulary() = default;
  explicit NameVocabulary(std::span<const std::string> feature_names);

  // Lower-cased alphanumeric runs of `name`.
  static std::vector<std::string> split(const std::string& name);
  // Token ids for a feature name, truncated to max_tokens.
  std::vector<std::size_t> encode(const std::string& name, std::size_t max_tokens) const;

  std::size_t size() const noexcept { return words_.size() + 2; }
  const std::vector<std::string>& words() const noexcept { return words_; }
  static NameVocabulary from_words(std::vector<std::string> words);

 private:
  std::vector<std::string> words_;
  std::map<std::string, std::size_t> ids_;
};

struct TabularEncoderConfig {
  std::size_t name_vocab_size = 2;
  std::size_t dim = 24;  // D_tabular
  std::size_t heads = 4;
  std::size_t name_tokens = 4;  // F
  std::size_t ffn_dim = 48;
};

struct TabularEncoderParams {
  TabularEncoderConfig cfg;
  Tensor name_embedding;  // [name_vocab_size x dim]
  Tensor bin_embedding;   // [256 x dim], row b-1 holds bin b
  Tensor cls;             // [1 x dim]
  TransformerBlock block;

  static TabularEncoderParams init(const TabularEncoderConfig& cfg, ParamInit& init);
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Input rows [CLS; F name slots; value] with value = bin_embedding[bin] *
// x_norm, and the key mask that hides padded name slots.
struct LabTokens {
  Tensor rows;  // [(F + 2) x dim]
  std::vector<bool> key_mask;
};
LabTokens lab_token_matrix(const TabularEncoderParams& p,
                           std::span<const std::size_t> name_tokens, int bin, double x_norm);

// [1 x D_tabular] CLS readout after intra-feature attention.
Tensor encode_lab_event(const TabularEncoderParams& p, std::span<const std::size_t> name_tokens,
                        int bin, double x_norm);

struct ModalityMapperParams {
  Tensor weight;  // [D_tabular x D_textual]
  Tensor bias;    // [1 x D_textual]
  double negative_slope = 0.01;

  static ModalityMapperParams init(std::size_t tab_dim, std::size_t text_dim,
                                   double negative_slope, ParamInit& init);
  void collect(const std::string& prefix, NamedParams& out) const;
};

// leaky_relu(u * W + b) for u of shape [rows x D_tabular].
Tensor map_modality(const ModalityMapperParams& p, const Tensor& u);

}  // namespace mihst
