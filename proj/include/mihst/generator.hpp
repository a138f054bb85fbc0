#pragma once

// Synthetic admissions with planted label rules.
//
// A rule is one or more terms joined by '&':
//   lab:<feature>:<percentile>  feature measured and its stay mean above the
//                               population percentile of that mean
//   token:<id>                  token id present in some note chunk; when
//                               planted it goes into every chunk of the stay
// Lab features used by a rule get a two-cluster latent level split at the
// rule's percentile, so every measurement falls on the correct side of the
// threshold.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mihst/admission.hpp"
#include "mihst/kv_config.hpp"

namespace mihst {

struct LabFeatureSpec {
  std::string name;
  std::string unit;
  double prevalence = 0.9;  // fraction of admissions measuring it
  double center = 0.0;
  double spread = 1.0;
};

struct RuleTerm {
  enum class Kind { lab, token };
  Kind kind = Kind::lab;
  std::string feature;
  double percentile = 70.0;  // (0, 100)
  std::size_t token = 0;
};

struct PlantedRule {
  std::vector<RuleTerm> terms;

  static PlantedRule parse(const std::string& text);
  std::string text() const;
};

struct GeneratorConfig {
  std::size_t train_admissions = 500;
  std::size_t dev_admissions = 200;
  std::size_t test_admissions = 0;
  std::size_t labels = 6;
  std::vector<LabFeatureSpec> features = default_features(8, 0.9);
  std::size_t note_vocab = 512;
  std::size_t chunk_min = 8;
  std::size_t chunk_max = 24;
  double mean_notes = 3.0;  // per admission, at least one
  double mean_draws = 3.0;  // lab draw times per admission, at least one
  double note_rate = 0.1;   // events per hour
  double lab_rate = 0.15;
  double draw_inclusion = 0.7;  // chance a measured feature is in a draw
  double token_rate = 0.3;      // chance a rule token is planted
  double noise = 0.0;           // label flip probability
  std::vector<PlantedRule> rules;  // one per label
  std::uint64_t seed = 7;

  // Default inventory of `n` lab features.
  static std::vector<LabFeatureSpec> default_features(std::size_t n, double prevalence);
  // Label i gets lab:<feature i/2>:70 for even i and token:<i + 1> for odd i.
  static std::vector<PlantedRule> default_rules(std::size_t labels,
                                                const std::vector<LabFeatureSpec>& features);

  // Keys: train_admissions dev_admissions test_admissions labels lab_features
  // prevalence prevalence.<feature> note_vocab chunk_min chunk_max mean_notes
  // mean_draws note_rate lab_rate draw_inclusion token_rate noise seed
  // rule.<label index>. MIHST_SEED replaces `seed`.
  static GeneratorConfig from_kv(const KvConfig& kv);
  static GeneratorConfig load(const std::filesystem::path& path);

  // Throws ConfigError on an invalid or unsatisfiable setting.
  void validate() const;
};

struct GeneratedData {
  LabelVocabulary labels;
  std::vector<AdmissionRecord> train, dev, test;
  nlohmann::ordered_json manifest;
};

GeneratedData generate(const GeneratorConfig& cfg);

// Positive rate implied by a rule before label noise.
double rule_rate(const PlantedRule& rule, const GeneratorConfig& cfg);
// Rule threshold of a lab feature (the latent cluster split point).
double rule_threshold(const LabFeatureSpec& f);

// Writes train.jsonl, dev.jsonl, test.jsonl (if any), labels.txt and
// manifest.json into `dir`, creating it if needed.
void write_generated(const GeneratedData& data, const std::filesystem::path& dir);

}  // namespace mihst
