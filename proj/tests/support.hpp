#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "mihst/tensor.hpp"

namespace testing {

inline mihst::Tensor random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                   bool requires_grad = false, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = u(rng);
  return mihst::Tensor::from_data({rows, cols}, std::move(v), requires_grad);
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("mihst_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace testing

#include "mihst/model.hpp"

namespace testing {

// Random model-ready admission: notes and labs on a coarse time grid so that
// lab groups and note/lab ties are common.
inline mihst::ModelInput random_input(std::mt19937_64& rng, const mihst::ModelConfig& cfg,
                                      std::size_t name_vocab, std::size_t max_notes = 4,
                                      std::size_t max_labs = 7) {
  std::uniform_int_distribution<std::size_t> n_notes(0, max_notes), n_labs(0, max_labs);
  std::uniform_int_distribution<int> slot(0, 8);
  std::uniform_int_distribution<std::size_t> tok(0, cfg.note_vocab - 1), len(1, cfg.chunk_tokens);
  std::uniform_int_distribution<std::size_t> name(2, name_vocab - 1), name_len(1, cfg.name_tokens);
  std::uniform_int_distribution<int> bin(1, 256);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  mihst::ModelInput in;
  std::size_t nn = n_notes(rng), nl = n_labs(rng);
  if (nn + nl == 0) nn = 1;
  for (std::size_t i = 0; i < nn; ++i) {
    mihst::NoteInput n;
    n.time = 0.5 * slot(rng);
    n.tokens.resize(len(rng));
    for (auto& t : n.tokens) t = tok(rng);
    in.notes.push_back(std::move(n));
  }
  for (std::size_t i = 0; i < nl; ++i) {
    mihst::LabInput l;
    l.time = 0.5 * slot(rng);
    l.name_tokens.resize(name_len(rng));
    for (auto& t : l.name_tokens) t = name(rng);
    l.bin = bin(rng);
    l.x_norm = unit(rng);
    in.labs.push_back(std::move(l));
  }
  std::stable_sort(in.notes.begin(), in.notes.end(), [](auto& a, auto& b) { return a.time < b.time; });
  std::stable_sort(in.labs.begin(), in.labs.end(), [](auto& a, auto& b) { return a.time < b.time; });
  return in;
}

inline mihst::ModelConfig small_config(std::size_t labels = 3) {
  mihst::ModelConfig c;
  c.note_vocab = 50;
  c.text_dim = 16;
  c.tab_dim = 12;
  c.encoder_heads = 4;
  c.chunk_tokens = 8;
  c.name_tokens = 3;
  c.fusion_layers = 2;
  c.fusion_heads = 4;
  c.labels = labels;
  return c;
}

}  // namespace testing

#include "mihst/generator.hpp"

namespace testing {

inline mihst::GeneratorConfig tiny_generator(std::size_t train, std::size_t dev, std::size_t labels,
                                             std::uint64_t seed) {
  mihst::GeneratorConfig g;
  g.train_admissions = train;
  g.dev_admissions = dev;
  g.labels = labels;
  g.note_vocab = 64;
  g.features = mihst::GeneratorConfig::default_features(4, 0.9);
  g.rules = mihst::GeneratorConfig::default_rules(labels, g.features);
  g.seed = seed;
  return g;
}

}  // namespace testing
