#include <fstream>

#include "mihst/model.hpp"

namespace mihst {

using nlohmann::ordered_json;

ordered_json ModelConfig::to_json() const {
  ordered_json j;
  j["note_vocab"] = note_vocab;
  j["text_dim"] = text_dim;
  j["tab_dim"] = tab_dim;
  j["encoder_heads"] = encoder_heads;
  j["chunk_tokens"] = chunk_tokens;
  j["name_tokens"] = name_tokens;
  j["max_chunks"] = max_chunks;
  j["fusion_layers"] = fusion_layers;
  j["fusion_heads"] = fusion_heads;
  j["labels"] = labels;
  j["ffn_mult"] = ffn_mult;
  j["negative_slope"] = negative_slope;
  j["position_encoding"] = position_encoding;
  j["label_bias"] = label_bias;
  return j;
}

ModelConfig ModelConfig::from_json(const ordered_json& j) {
  ModelConfig c;
  c.note_vocab = j.at("note_vocab").get<std::size_t>();
  c.text_dim = j.at("text_dim").get<std::size_t>();
  c.tab_dim = j.at("tab_dim").get<std::size_t>();
  c.encoder_heads = j.at("encoder_heads").get<std::size_t>();
  c.chunk_tokens = j.at("chunk_tokens").get<std::size_t>();
  c.name_tokens = j.at("name_tokens").get<std::size_t>();
  c.max_chunks = j.at("max_chunks").get<std::size_t>();
  c.fusion_layers = j.at("fusion_layers").get<std::size_t>();
  c.fusion_heads = j.at("fusion_heads").get<std::size_t>();
  c.labels = j.at("labels").get<std::size_t>();
  c.ffn_mult = j.at("ffn_mult").get<std::size_t>();
  c.negative_slope = j.at("negative_slope").get<double>();
  c.position_encoding = j.at("position_encoding").get<bool>();
  c.label_bias = j.at("label_bias").get<bool>();
  return c;
}

ordered_json Checkpoint::to_json() const {
  ordered_json j;
  j["format"] = "mihst-checkpoint";
  j["version"] = 1;
  j["config"] = model.cfg.to_json();
  j["labels"] = prep.labels.codes();
  j["lab_features"] = prep.lab_features;
  j["name_words"] = prep.names.words();
  j["binning"] = prep.binning.to_json();
  auto params = ordered_json::array();
  for (const auto& [name, t] : model.params()) {
    ordered_json p;
    p["name"] = name;
    p["shape"] = t.shape();
    p["data"] = std::vector<double>(t.data().begin(), t.data().end());
    params.push_back(std::move(p));
  }
  j["params"] = std::move(params);
  return j;
}

Checkpoint Checkpoint::from_json(const ordered_json& j) {
  if (j.value("format", std::string{}) != "mihst-checkpoint") {
    throw ParseError("not a mihst checkpoint", 0);
  }
  if (j.value("version", 0) != 1) throw ParseError("unsupported checkpoint version", 0);
  Checkpoint c;
  c.prep.labels = LabelVocabulary(j.at("labels").get<std::vector<std::string>>());
  c.prep.lab_features = j.at("lab_features").get<std::vector<std::string>>();
  c.prep.names = NameVocabulary::from_words(j.at("name_words").get<std::vector<std::string>>());
  c.prep.binning = BinningTable::from_json(j.at("binning"));
  const ModelConfig cfg = ModelConfig::from_json(j.at("config"));
  c.model = MihstModel::init(cfg, c.prep.names.size(), 0);

  NamedParams stored;
  for (const auto& p : j.at("params")) {
    stored.emplace_back(p.at("name").get<std::string>(),
                        Tensor::from_data(p.at("shape").get<Shape>(),
                                          p.at("data").get<std::vector<double>>()));
  }
  NamedParams dst = c.model.params();
  if (stored.size() != dst.size()) {
    throw ParseError("checkpoint holds " + std::to_string(stored.size()) +
                         " parameter tensors, model expects " + std::to_string(dst.size()),
                     0);
  }
  copy_params(stored, dst);
  return c;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << to_json().dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), 0);
  }
  return from_json(j);
}

}  // namespace mihst
