#pragma once

// Flat "key = value" config files. '#' starts a comment; blank lines are
// ignored. Keys are looked up by the readers below; anything left unread is
// reported by reject_unknown().

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mihst/model.hpp"
#include "mihst/selection.hpp"
#include "mihst/training.hpp"

namespace mihst {

class KvConfig {
 public:
  static KvConfig parse(std::istream& in);
  static KvConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  std::optional<std::string> raw(const std::string& key) const;

  std::string str(const std::string& key, const std::string& fallback) const;
  double real(const std::string& key, double fallback) const;
  std::size_t count(const std::string& key, std::size_t fallback) const;
  std::uint64_t u64(const std::string& key, std::uint64_t fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::vector<double> reals(const std::string& key, const std::vector<double>& fallback) const;

  // Keys starting with `prefix`, in sorted order.
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  void set(const std::string& key, const std::string& value);
  void reject_unknown() const;

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };
  const Entry* find(const std::string& key) const;
  [[noreturn]] void bad_value(const std::string& key, const char* expected) const;

  std::map<std::string, Entry> entries_;
  mutable std::set<std::string> used_;
};

// Value of MIHST_SEED if set. Throws ConfigError if it is not an integer.
std::optional<std::uint64_t> seed_override();

// Settings for select-features / train / eval.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SelectionThresholds selection;
  std::vector<double> cutoffs;  // evaluation time cutoffs, hours

  // Keys (all optional):
  //   text_dim tab_dim encoder_heads chunk_tokens name_tokens max_chunks
  //   fusion_layers fusion_heads ffn_mult negative_slope note_vocab
  //   position_encoding label_bias
  //   learning_rate epochs seed momentum clip_norm shuffle
  //   schedule (uniform|linear_ramp|final_only|custom) schedule_weights
  //   normalize_weights
  //   selection_scale top_k lambda_ladder decision_threshold
  //   cutoffs
  // MIHST_SEED replaces `seed`.
  static RunConfig from_kv(const KvConfig& kv);
  static RunConfig load(const std::filesystem::path& path);
};

}  // namespace mihst
