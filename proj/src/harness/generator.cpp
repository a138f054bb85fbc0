#include "mihst/generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "mihst/error.hpp"

namespace mihst {

using nlohmann::ordered_json;

namespace {

struct Inventory {
  const char* name;
  const char* unit;
  double center, spread;
};

constexpr Inventory kInventory[] = {
    {"glucose", "mg/dL", 110.0, 30.0},   {"creatinine", "mg/dL", 1.2, 0.4},
    {"hemoglobin", "g/dL", 12.0, 1.5},   {"potassium", "mmol/L", 4.2, 0.5},
    {"sodium", "mmol/L", 139.0, 3.0},    {"platelets", "K/uL", 220.0, 60.0},
    {"lactate", "mmol/L", 1.8, 0.6},     {"bilirubin", "mg/dL", 1.0, 0.4},
    {"wbc", "K/uL", 9.0, 3.0},           {"albumin", "g/dL", 3.5, 0.5},
    {"bun", "mg/dL", 20.0, 8.0},         {"chloride", "mmol/L", 103.0, 3.0},
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::string label_code(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "C%03zu", i + 1);
  return buf;
}

std::string admission_id(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "A%06zu", i + 1);
  return buf;
}

double round_to(double v, double q) { return std::round(v / q) * q; }

// Measurement noise stays inside +-0.45 spread; rule clusters start 1 spread
// away from the threshold.
constexpr double kNoiseSd = 0.15;
constexpr double kNoiseClip = 0.45;

struct Prepared {
  std::map<std::string, std::size_t> feature_index;
  std::map<std::string, double> rule_pct;  // lab feature -> percentile
  std::set<std::size_t> reserved_tokens;
};

Prepared prepare(const GeneratorConfig& cfg) {
  Prepared p;
  for (std::size_t i = 0; i < cfg.features.size(); ++i) p.feature_index[cfg.features[i].name] = i;
  for (const auto& r : cfg.rules)
    for (const auto& t : r.terms) {
      if (t.kind == RuleTerm::Kind::lab)
        p.rule_pct[t.feature] = t.percentile;
      else
        p.reserved_tokens.insert(t.token);
    }
  return p;
}

AdmissionRecord make_admission(const GeneratorConfig& cfg, const Prepared& prep, std::size_t idx,
                               std::vector<std::uint8_t>& clean_labels) {
  std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(idx + 1)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto poisson = [&](double mean) {
    return mean > 0.0 ? std::poisson_distribution<std::size_t>(mean)(rng) : std::size_t{0};
  };
  auto arrival_times = [&](std::size_t n, double rate) {
    std::exponential_distribution<double> gap(rate);
    std::vector<double> ts;
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      t += gap(rng);
      ts.push_back(std::max(0.01, round_to(t, 0.01)));
    }
    return ts;
  };

  AdmissionRecord adm;
  adm.admission_id = admission_id(idx);

  // notes
  const std::size_t n_notes = 1 + poisson(cfg.mean_notes - 1.0);
  const auto note_times = arrival_times(n_notes, cfg.note_rate);
  std::uniform_int_distribution<std::size_t> len(cfg.chunk_min, cfg.chunk_max);
  std::uniform_int_distribution<std::size_t> tok(0, cfg.note_vocab - 1);
  std::vector<std::vector<std::size_t>> chunks(n_notes);
  for (auto& c : chunks) {
    c.resize(len(rng));
    for (auto& t : c) {
      do t = tok(rng);
      while (prep.reserved_tokens.count(t));
    }
  }
  std::set<std::size_t> present_tokens;
  for (std::size_t t : prep.reserved_tokens) {
    if (unit(rng) >= cfg.token_rate) continue;
    for (auto& c : chunks) c[std::uniform_int_distribution<std::size_t>(0, c.size() - 1)(rng)] = t;
  }
  for (std::size_t i = 0; i < n_notes; ++i) {
    for (std::size_t t : chunks[i]) present_tokens.insert(t);
    adm.events.push_back(ClinicalEvent::note(note_times[i], std::move(chunks[i])));
  }

  // labs, drawn in panels sharing a timestamp
  const std::size_t n_draws = 1 + poisson(cfg.mean_draws - 1.0);
  const auto draw_times = arrival_times(n_draws, cfg.lab_rate);
  std::normal_distribution<double> noise(0.0, kNoiseSd);
  std::vector<std::vector<ClinicalEvent>> draws(n_draws);
  std::map<std::string, std::pair<double, std::size_t>> sums;
  for (const auto& f : cfg.features) {
    if (unit(rng) >= f.prevalence) continue;
    double level;
    auto rp = prep.rule_pct.find(f.name);
    if (rp != prep.rule_pct.end()) {
      const bool high = unit(rng) >= rp->second / 100.0;
      const double off = 1.0 + unit(rng);
      level = f.center + (high ? off : -off) * f.spread;
    } else {
      level = f.center + (4.0 * unit(rng) - 2.0) * f.spread;
    }
    std::vector<std::size_t> in;
    for (std::size_t d = 0; d < n_draws; ++d)
      if (unit(rng) < cfg.draw_inclusion) in.push_back(d);
    if (in.empty()) in.push_back(std::uniform_int_distribution<std::size_t>(0, n_draws - 1)(rng));
    for (std::size_t d : in) {
      const double e = std::clamp(noise(rng), -kNoiseClip, kNoiseClip) * f.spread;
      const double v = round_to(level + e, 1e-3);
      draws[d].push_back(ClinicalEvent::lab(draw_times[d], f.name, v, f.unit));
      auto& s = sums[f.name];
      s.first += v;
      ++s.second;
    }
  }
  for (auto& d : draws)
    for (auto& ev : d) adm.events.push_back(std::move(ev));

  // labels from the realized events, then noise
  for (std::size_t l = 0; l < cfg.rules.size(); ++l) {
    bool holds = true;
    for (const auto& t : cfg.rules[l].terms) {
      if (t.kind == RuleTerm::Kind::token) {
        holds = holds && present_tokens.count(t.token);
      } else {
        auto s = sums.find(t.feature);
        const auto& f = cfg.features[prep.feature_index.at(t.feature)];
        holds = holds && s != sums.end() &&
                s->second.first / static_cast<double>(s->second.second) > rule_threshold(f);
      }
    }
    clean_labels[l] = holds;
    const bool flip = cfg.noise > 0.0 && unit(rng) < cfg.noise;
    if (holds != flip) adm.labels.push_back(label_code(l));
  }
  canonicalize(adm);
  return adm;
}

}  // namespace

PlantedRule PlantedRule::parse(const std::string& text) {
  PlantedRule r;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, '&')) {
    part = trim(part);
    std::vector<std::string> f;
    std::stringstream ps(part);
    std::string x;
    while (std::getline(ps, x, ':')) f.push_back(trim(x));
    RuleTerm t;
    try {
      if (f.size() == 3 && f[0] == "lab") {
        t.kind = RuleTerm::Kind::lab;
        t.feature = f[1];
        std::size_t used = 0;
        t.percentile = std::stod(f[2], &used);
        if (used != f[2].size()) throw std::invalid_argument(f[2]);
      } else if (f.size() == 2 && f[0] == "token") {
        t.kind = RuleTerm::Kind::token;
        std::size_t used = 0;
        t.token = std::stoul(f[1], &used);
        if (used != f[1].size()) throw std::invalid_argument(f[1]);
      } else {
        throw std::invalid_argument(part);
      }
    } catch (const std::logic_error&) {
      throw ConfigError("bad rule term '" + part + "' (expected lab:<feature>:<pct> or token:<id>)");
    }
    r.terms.push_back(std::move(t));
  }
  if (r.terms.empty()) throw ConfigError("empty rule");
  if (trim(text).back() == '&') throw ConfigError("rule '" + text + "' ends with '&'");
  return r;
}

std::string PlantedRule::text() const {
  std::string out;
  for (const auto& t : terms) {
    if (!out.empty()) out += " & ";
    if (t.kind == RuleTerm::Kind::token) {
      out += "token:" + std::to_string(t.token);
    } else {
      std::ostringstream p;
      p << t.percentile;
      out += "lab:" + t.feature + ":" + p.str();
    }
  }
  return out;
}

std::vector<LabFeatureSpec> GeneratorConfig::default_features(std::size_t n, double prevalence) {
  std::vector<LabFeatureSpec> out;
  constexpr std::size_t kn = sizeof kInventory / sizeof kInventory[0];
  for (std::size_t i = 0; i < n; ++i) {
    LabFeatureSpec f;
    if (i < kn) {
      f = {kInventory[i].name, kInventory[i].unit, prevalence, kInventory[i].center,
           kInventory[i].spread};
    } else {
      f = {"lab" + std::to_string(i), "u", prevalence, 50.0, 10.0};
    }
    out.push_back(f);
  }
  return out;
}

std::vector<PlantedRule> GeneratorConfig::default_rules(std::size_t labels,
                                                        const std::vector<LabFeatureSpec>& features) {
  std::vector<PlantedRule> out;
  for (std::size_t i = 0; i < labels; ++i) {
    RuleTerm t;
    if (i % 2 == 0 && !features.empty()) {
      t.kind = RuleTerm::Kind::lab;
      t.feature = features[(i / 2) % features.size()].name;
      t.percentile = 70.0;
    } else {
      t.kind = RuleTerm::Kind::token;
      t.token = i + 1;
    }
    out.push_back({{t}});
  }
  return out;
}

GeneratorConfig GeneratorConfig::from_kv(const KvConfig& kv) {
  GeneratorConfig c;
  c.train_admissions = kv.count("train_admissions", c.train_admissions);
  c.dev_admissions = kv.count("dev_admissions", c.dev_admissions);
  c.test_admissions = kv.count("test_admissions", c.test_admissions);
  c.labels = kv.count("labels", c.labels);
  const double prev = kv.real("prevalence", 0.9);
  c.features = default_features(kv.count("lab_features", 8), prev);
  for (auto& f : c.features) f.prevalence = kv.real("prevalence." + f.name, f.prevalence);
  for (const auto& k : kv.keys_with_prefix("prevalence.")) {
    const std::string name = k.substr(11);
    if (std::none_of(c.features.begin(), c.features.end(), [&](const auto& f) { return f.name == name; }))
      throw ConfigError("prevalence given for unknown lab feature '" + name + "'");
  }
  c.note_vocab = kv.count("note_vocab", c.note_vocab);
  c.chunk_min = kv.count("chunk_min", c.chunk_min);
  c.chunk_max = kv.count("chunk_max", c.chunk_max);
  c.mean_notes = kv.real("mean_notes", c.mean_notes);
  c.mean_draws = kv.real("mean_draws", c.mean_draws);
  c.note_rate = kv.real("note_rate", c.note_rate);
  c.lab_rate = kv.real("lab_rate", c.lab_rate);
  c.draw_inclusion = kv.real("draw_inclusion", c.draw_inclusion);
  c.token_rate = kv.real("token_rate", c.token_rate);
  c.noise = kv.real("noise", c.noise);
  c.seed = kv.u64("seed", c.seed);
  if (auto s = seed_override()) c.seed = *s;

  c.rules = default_rules(c.labels, c.features);
  for (const auto& k : kv.keys_with_prefix("rule.")) {
    std::size_t l = 0;
    try {
      std::size_t used = 0;
      l = std::stoul(k.substr(5), &used);
      if (used != k.size() - 5) throw std::invalid_argument(k);
    } catch (const std::logic_error&) {
      throw ConfigError("bad rule key '" + k + "' (expected rule.<label index>)");
    }
    if (l >= c.labels) throw ConfigError(k + ": label index out of range");
    c.rules[l] = PlantedRule::parse(*kv.raw(k));
  }
  kv.reject_unknown();
  c.validate();
  return c;
}

GeneratorConfig GeneratorConfig::load(const std::filesystem::path& path) {
  const KvConfig kv = KvConfig::load(path);
  try {
    return from_kv(kv);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void GeneratorConfig::validate() const {
  if (train_admissions == 0) throw ConfigError("train_admissions must be >= 1");
  if (labels == 0) throw ConfigError("labels must be >= 1");
  if (rules.size() != labels) throw ConfigError("every label needs exactly one rule");
  if (note_vocab < 2) throw ConfigError("note_vocab must be >= 2");
  if (chunk_min == 0 || chunk_min > chunk_max) throw ConfigError("need 1 <= chunk_min <= chunk_max");
  if (mean_notes < 1.0 || mean_draws < 1.0) throw ConfigError("mean_notes and mean_draws must be >= 1");
  if (!(note_rate > 0.0) || !(lab_rate > 0.0)) throw ConfigError("event rates must be > 0");
  if (!(draw_inclusion > 0.0 && draw_inclusion <= 1.0)) throw ConfigError("draw_inclusion must be in (0,1]");
  if (!(token_rate > 0.0 && token_rate <= 1.0)) throw ConfigError("token_rate must be in (0,1]");
  if (!(noise >= 0.0 && noise < 0.5)) throw ConfigError("noise must be in [0,0.5)");

  std::map<std::string, const LabFeatureSpec*> by_name;
  for (const auto& f : features) {
    if (!by_name.emplace(f.name, &f).second) throw ConfigError("duplicate lab feature '" + f.name + "'");
    if (!(f.spread > 0.0)) throw ConfigError("lab feature '" + f.name + "' needs spread > 0");
  }
  std::map<std::string, double> pct;
  std::set<std::size_t> tokens;
  for (std::size_t l = 0; l < rules.size(); ++l) {
    if (rules[l].terms.empty()) throw ConfigError("label " + std::to_string(l) + " has no rule");
    std::set<std::string> seen;
    for (const auto& t : rules[l].terms) {
      if (t.kind == RuleTerm::Kind::token) {
        if (t.token >= note_vocab) throw ConfigError("rule token " + std::to_string(t.token) + " outside note_vocab");
        if (!seen.insert("token:" + std::to_string(t.token)).second)
          throw ConfigError("label " + std::to_string(l) + " repeats a rule term");
        tokens.insert(t.token);
        continue;
      }
      auto f = by_name.find(t.feature);
      if (f == by_name.end()) throw ConfigError("rule uses unknown lab feature '" + t.feature + "'");
      if (!(f->second->prevalence > 0.0))
        throw ConfigError("unsatisfiable rule for label " + std::to_string(l) + ": lab feature '" +
                          t.feature + "' has prevalence 0");
      if (!(t.percentile > 0.0 && t.percentile < 100.0)) throw ConfigError("rule percentile must be in (0,100)");
      if (auto [it, fresh] = pct.emplace(t.feature, t.percentile); !fresh && it->second != t.percentile)
        throw ConfigError("lab feature '" + t.feature + "' is used with two different percentiles");
      if (!seen.insert("lab:" + t.feature).second)
        throw ConfigError("label " + std::to_string(l) + " repeats a rule term");
    }
  }
  for (const auto& f : features)
    if (!(f.prevalence > 0.0 && f.prevalence <= 1.0))
      throw ConfigError("prevalence of '" + f.name + "' must be in (0,1]");
  if (tokens.size() >= note_vocab) throw ConfigError("rule tokens leave no background vocabulary");
}

double rule_threshold(const LabFeatureSpec& f) { return f.center; }

double rule_rate(const PlantedRule& rule, const GeneratorConfig& cfg) {
  double r = 1.0;
  for (const auto& t : rule.terms) {
    if (t.kind == RuleTerm::Kind::token) {
      r *= cfg.token_rate;
    } else {
      auto f = std::find_if(cfg.features.begin(), cfg.features.end(),
                            [&](const auto& x) { return x.name == t.feature; });
      if (f == cfg.features.end()) throw ConfigError("rule uses unknown lab feature '" + t.feature + "'");
      r *= f->prevalence * (1.0 - t.percentile / 100.0);
    }
  }
  return r;
}

GeneratedData generate(const GeneratorConfig& cfg) {
  cfg.validate();
  const Prepared prep = prepare(cfg);
  GeneratedData out;
  std::vector<std::string> codes;
  for (std::size_t l = 0; l < cfg.labels; ++l) codes.push_back(label_code(l));
  out.labels = LabelVocabulary(codes);

  const std::size_t total = cfg.train_admissions + cfg.dev_admissions + cfg.test_admissions;
  std::vector<std::uint8_t> clean(cfg.labels);
  std::vector<std::size_t> clean_pos(cfg.labels, 0);
  for (std::size_t i = 0; i < total; ++i) {
    AdmissionRecord a = make_admission(cfg, prep, i, clean);
    for (std::size_t l = 0; l < cfg.labels; ++l) clean_pos[l] += clean[l];
    if (i < cfg.train_admissions)
      out.train.push_back(std::move(a));
    else if (i < cfg.train_admissions + cfg.dev_admissions)
      out.dev.push_back(std::move(a));
    else
      out.test.push_back(std::move(a));
  }

  ordered_json m;
  m["seed"] = cfg.seed;
  m["admissions"] = {{"train", cfg.train_admissions}, {"dev", cfg.dev_admissions}, {"test", cfg.test_admissions}};
  m["noise"] = cfg.noise;
  m["token_rate"] = cfg.token_rate;
  ordered_json feats = ordered_json::array();
  for (const auto& f : cfg.features)
    feats.push_back({{"name", f.name}, {"unit", f.unit}, {"prevalence", f.prevalence},
                     {"center", f.center}, {"spread", f.spread}});
  m["lab_features"] = std::move(feats);
  ordered_json labels = ordered_json::array();
  for (std::size_t l = 0; l < cfg.labels; ++l) {
    ordered_json terms = ordered_json::array();
    for (const auto& t : cfg.rules[l].terms) {
      if (t.kind == RuleTerm::Kind::token) {
        terms.push_back({{"kind", "token"}, {"token", t.token}});
      } else {
        const auto& f = cfg.features[prep.feature_index.at(t.feature)];
        terms.push_back({{"kind", "lab"}, {"feature", t.feature}, {"percentile", t.percentile},
                         {"threshold", rule_threshold(f)}});
      }
    }
    const double r = rule_rate(cfg.rules[l], cfg);
    labels.push_back({{"code", codes[l]},
                      {"rule", cfg.rules[l].text()},
                      {"terms", std::move(terms)},
                      {"implied_rate", r},
                      {"expected_rate", r * (1.0 - cfg.noise) + (1.0 - r) * cfg.noise},
                      {"rule_positives", clean_pos[l]}});
  }
  m["labels"] = std::move(labels);
  out.manifest = std::move(m);
  return out;
}

void write_generated(const GeneratedData& data, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  save_admissions(dir / "train.jsonl", data.train);
  save_admissions(dir / "dev.jsonl", data.dev);
  if (!data.test.empty()) save_admissions(dir / "test.jsonl", data.test);
  data.labels.save(dir / "labels.txt");
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << data.manifest.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + (dir / "manifest.json").string());
}

}  // namespace mihst
