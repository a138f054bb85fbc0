#include "mihst/model.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>

namespace mihst {

std::vector<TimelinePosition> ModelInput::timeline() const {
  std::vector<double> nt, lt;
  nt.reserve(notes.size());
  lt.reserve(labs.size());
  for (const auto& n : notes) nt.push_back(n.time);
  for (const auto& l : labs) lt.push_back(l.time);
  return merge_timeline(nt, lt);
}

ModelInput ModelInput::prefix(std::size_t positions) const {
  const auto tl = timeline();
  std::vector<bool> keep_note(notes.size(), false), keep_lab(labs.size(), false);
  for (std::size_t i = 0; i < std::min(positions, tl.size()); ++i) {
    auto& keep = tl[i].kind == PositionKind::note ? keep_note : keep_lab;
    for (auto m : tl[i].members) keep[m] = true;
  }
  ModelInput out;
  for (std::size_t i = 0; i < notes.size(); ++i)
    if (keep_note[i]) out.notes.push_back(notes[i]);
  for (std::size_t i = 0; i < labs.size(); ++i)
    if (keep_lab[i]) out.labs.push_back(labs[i]);
  return out;
}

void write_prediction_csv(std::ostream& out, const TemporalPrediction& pred) {
  const std::size_t labels = pred.labels();
  out << "time";
  for (std::size_t l = 0; l < labels; ++l) out << ",label_" << l;
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t t = 0; t < pred.positions(); ++t) {
    out << pred.times[t];
    for (std::size_t l = 0; l < labels; ++l) out << ',' << pred.probs(t, l);
    out << '\n';
  }
}

MihstModel MihstModel::init(const ModelConfig& cfg, std::size_t name_vocab_size,
                            std::uint64_t seed) {
  ParamInit init(seed);
  MihstModel m;
  m.cfg = cfg;
  NoteEncoderConfig nc;
  nc.vocab_size = cfg.note_vocab;
  nc.dim = cfg.text_dim;
  nc.heads = cfg.encoder_heads;
  nc.max_tokens = cfg.chunk_tokens;
  nc.ffn_dim = cfg.ffn_mult * cfg.text_dim;
  nc.position_encoding = cfg.position_encoding;
  m.note = NoteEncoderParams::init(nc, init);

  TabularEncoderConfig tc;
  tc.name_vocab_size = std::max<std::size_t>(name_vocab_size, 2);
  tc.dim = cfg.tab_dim;
  tc.heads = cfg.encoder_heads;
  tc.name_tokens = cfg.name_tokens;
  tc.ffn_dim = cfg.ffn_mult * cfg.tab_dim;
  m.tab = TabularEncoderParams::init(tc, init);

  m.mapper = ModalityMapperParams::init(cfg.tab_dim, cfg.text_dim, cfg.negative_slope, init);

  FusionConfig fc;
  fc.dim = cfg.text_dim;
  fc.heads = cfg.fusion_heads;
  fc.layers = cfg.fusion_layers;
  fc.labels = cfg.labels;
  fc.ffn_dim = cfg.ffn_mult * cfg.text_dim;
  fc.label_bias = cfg.label_bias;
  m.fusion = FusionParams::init(fc, init);
  return m;
}

NamedParams MihstModel::params() const {
  NamedParams out;
  note.collect("note", out);
  tab.collect("tab", out);
  mapper.collect("mapper", out);
  fusion.collect("fusion", out);
  return out;
}

std::pair<Tensor, std::vector<double>> MihstModel::fused_events(const ModelInput& in) const {
  const auto tl = in.timeline();
  if (tl.empty()) throw Error("no observed events");

  std::vector<Tensor> note_rows(in.notes.size());
  for (std::size_t i = 0; i < in.notes.size(); ++i) {
    note_rows[i] = encode_note_chunk(note, in.notes[i].tokens);
  }

  Tensor pooled_rows;
  if (!in.labs.empty()) {
    std::vector<Tensor> lab_rows;
    std::vector<double> lab_times;
    lab_rows.reserve(in.labs.size());
    for (const auto& l : in.labs) {
      lab_rows.push_back(encode_lab_event(tab, l.name_tokens, l.bin, l.x_norm));
      lab_times.push_back(l.time);
    }
    const Tensor mapped = map_modality(mapper, concat_rows(lab_rows));
    pooled_rows = pool_by_timestamp(mapped, lab_times).rows;
  }

  std::vector<Tensor> rows;
  std::vector<double> times;
  rows.reserve(tl.size());
  std::size_t group = 0;
  for (const auto& pos : tl) {
    if (pos.kind == PositionKind::note) {
      rows.push_back(note_rows[pos.members.front()]);
    } else {
      // Pooled rows and lab timeline groups are both in ascending time.
      rows.push_back(slice_rows(pooled_rows, group++, 1));
    }
    times.push_back(pos.time);
  }
  return {rows.size() == 1 ? rows[0] : concat_rows(rows), std::move(times)};
}

Tensor MihstModel::forward_logits(const ModelInput& in) const {
  return temporal_logits(fusion, causal_encode(fusion, fused_events(in).first));
}

TemporalPrediction MihstModel::forward(const ModelInput& in) const {
  auto [events, times] = fused_events(in);
  return {std::move(times), predict_temporal(fusion, causal_encode(fusion, events))};
}

// ---------------------------------------------------------------------------

Preprocessor Preprocessor::fit(LabelVocabulary labels, std::vector<std::string> lab_features,
                               std::span<const AdmissionRecord> train) {
  std::sort(lab_features.begin(), lab_features.end());
  lab_features.erase(std::unique(lab_features.begin(), lab_features.end()), lab_features.end());
  Preprocessor p;
  p.labels = std::move(labels);
  p.binning = fit_binning(train, std::set<std::string>(lab_features.begin(), lab_features.end()));
  p.names = NameVocabulary(lab_features);
  p.lab_features = std::move(lab_features);
  return p;
}

ModelInput Preprocessor::prepare(const AdmissionRecord& adm, const ModelConfig& cfg,
                                 std::optional<std::size_t> max_chunks) const {
  ModelInput in;
  for (const auto& e : adm.events) {
    if (e.is_note()) {
      if (e.tokens.size() > cfg.chunk_tokens) {
        throw Error("admission " + adm.admission_id + ": note chunk longer than " +
                    std::to_string(cfg.chunk_tokens) + " tokens");
      }
      in.notes.push_back({e.time, e.tokens});
    } else if (binning.contains(e.feature)) {
      const auto bv = binning.bin_and_normalize(e.feature, e.value);
      in.labs.push_back({e.time, names.encode(e.feature, cfg.name_tokens), bv.bin, bv.x_norm});
    }
  }
  if (max_chunks) in.notes = select_chunks(std::move(in.notes), *max_chunks);
  return in;
}

void copy_params(const NamedParams& src, NamedParams& dst) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : src) by_name[name] = &t;
  for (auto& [name, t] : dst) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw Error("parameter '" + name + "' missing from source");
    if (it->second->size() != t.size()) {
      throw DimensionError("parameter '" + name + "' has shape " +
                           shape_str(it->second->shape()) + ", expected " + shape_str(t.shape()));
    }
    std::copy(it->second->data().begin(), it->second->data().end(), t.data_mut().begin());
  }
}

}  // namespace mihst
