#pragma once

// The full model: per-event encoders, modality mapper, timestamp pooling,
// chronological merge, causal transformer and label-wise prediction head.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mihst/admission.hpp"
#include "mihst/binning.hpp"
#include "mihst/encoders.hpp"
#include "mihst/fusion.hpp"
#include "mihst/timeline.hpp"

namespace mihst {

struct ModelConfig {
  std::size_t note_vocab = 512;
  std::size_t text_dim = 32;    // D_textual
  std::size_t tab_dim = 24;     // D_tabular
  std::size_t encoder_heads = 4;  // h_e
  std::size_t chunk_tokens = 32;  // T
  std::size_t name_tokens = 4;    // F
  std::size_t max_chunks = 8;     // N, applied when preparing training inputs
  std::size_t fusion_layers = 2;  // K
  std::size_t fusion_heads = 4;   // h_f
  std::size_t labels = 10;        // L
  std::size_t ffn_mult = 2;
  double negative_slope = 0.01;
  bool position_encoding = true;
  bool label_bias = false;

  nlohmann::ordered_json to_json() const;
  static ModelConfig from_json(const nlohmann::ordered_json& j);
};

struct NoteInput {
  double time = 0.0;
  std::vector<std::size_t> tokens;
};

struct LabInput {
  double time = 0.0;
  std::vector<std::size_t> name_tokens;
  int bin = 1;
  double x_norm = 0.0;
};

// Model-ready events of one admission.
struct ModelInput {
  std::vector<NoteInput> notes;
  std::vector<LabInput> labs;

  std::vector<TimelinePosition> timeline() const;
  std::size_t sequence_length() const { return timeline().size(); }
  // Keeps only the events of the first `positions` timeline positions.
  ModelInput prefix(std::size_t positions) const;
};

struct TemporalPrediction {
  std::vector<double> times;  // one per sequence position
  Tensor probs;               // [n x L]

  std::size_t positions() const { return times.size(); }
  std::size_t labels() const { return probs.cols(); }
};

// Writes "time,label_0,...,label_{L-1}" then one row per position.
void write_prediction_csv(std::ostream& out, const TemporalPrediction& pred);

class MihstModel {
 public:
  ModelConfig cfg;
  NoteEncoderParams note;
  TabularEncoderParams tab;
  ModalityMapperParams mapper;
  FusionParams fusion;

  static MihstModel init(const ModelConfig& cfg, std::size_t name_vocab_size, std::uint64_t seed);

  NamedParams params() const;

  // Fused event matrix E [(N+P) x D_textual] in timeline order, plus times.
  std::pair<Tensor, std::vector<double>> fused_events(const ModelInput& in) const;
  TemporalPrediction forward(const ModelInput& in) const;
  // Logits instead of probabilities, same layout.
  Tensor forward_logits(const ModelInput& in) const;
};

// Everything needed to turn an AdmissionRecord into a ModelInput.
struct Preprocessor {
  LabelVocabulary labels;
  std::vector<std::string> lab_features;  // whitelist, sorted
  BinningTable binning;
  NameVocabulary names;

  static Preprocessor fit(LabelVocabulary labels, std::vector<std::string> lab_features,
                          std::span<const AdmissionRecord> train);

  // Drops labs outside the whitelist; keeps at most `max_chunks` notes
  // (earliest first) when given.
  ModelInput prepare(const AdmissionRecord& adm, const ModelConfig& cfg,
                     std::optional<std::size_t> max_chunks = std::nullopt) const;
  std::vector<std::uint8_t> targets(const AdmissionRecord& adm) const {
    return labels.multi_hot(adm.labels);
  }
};

struct Checkpoint {
  Preprocessor prep;
  MihstModel model;

  nlohmann::ordered_json to_json() const;
  static Checkpoint from_json(const nlohmann::ordered_json& j);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

// Copies parameter values (not gradients) from `src` into `dst` by name.
void copy_params(const NamedParams& src, NamedParams& dst);

}  // namespace mihst
