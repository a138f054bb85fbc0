#include "mihst/kv_config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <sstream>

#include "mihst/error.hpp"

namespace mihst {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
bool parse_number(const std::string& s, T& out) {
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

}  // namespace

KvConfig KvConfig::parse(std::istream& in) {
  KvConfig cfg;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(no) + ": empty key");
    if (cfg.entries_.count(key))
      throw ConfigError("line " + std::to_string(no) + ": duplicate key '" + key + "'");
    cfg.entries_[key] = {trim(line.substr(eq + 1)), no};
  }
  return cfg;
}

KvConfig KvConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  try {
    return parse(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

const KvConfig::Entry* KvConfig::find(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

void KvConfig::bad_value(const std::string& key, const char* expected) const {
  const Entry& e = entries_.at(key);
  throw ConfigError("line " + std::to_string(e.line) + ": " + key + " = '" + e.value + "' is not " +
                    expected);
}

std::optional<std::string> KvConfig::raw(const std::string& key) const {
  if (const Entry* e = find(key)) return e->value;
  return std::nullopt;
}

std::string KvConfig::str(const std::string& key, const std::string& fallback) const {
  const Entry* e = find(key);
  return e ? e->value : fallback;
}

double KvConfig::real(const std::string& key, double fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  double v = 0.0;
  if (!parse_number(e->value, v)) bad_value(key, "a number");
  return v;
}

std::size_t KvConfig::count(const std::string& key, std::size_t fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  std::size_t v = 0;
  if (!parse_number(e->value, v)) bad_value(key, "a non-negative integer");
  return v;
}

std::uint64_t KvConfig::u64(const std::string& key, std::uint64_t fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  std::uint64_t v = 0;
  if (!parse_number(e->value, v)) bad_value(key, "a non-negative integer");
  return v;
}

bool KvConfig::flag(const std::string& key, bool fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
  if (e->value == "false" || e->value == "0" || e->value == "no") return false;
  bad_value(key, "a boolean");
}

std::vector<double> KvConfig::reals(const std::string& key, const std::vector<double>& fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  std::vector<double> out;
  std::stringstream ss(e->value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    double v = 0.0;
    if (!parse_number(item, v)) bad_value(key, "a comma-separated list of numbers");
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> KvConfig::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, e] : entries_)
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  return out;
}

void KvConfig::set(const std::string& key, const std::string& value) {
  auto& e = entries_[key];
  e.value = value;
}

void KvConfig::reject_unknown() const {
  for (const auto& [k, e] : entries_)
    if (!used_.count(k)) throw ConfigError("line " + std::to_string(e.line) + ": unknown key '" + k + "'");
}

std::optional<std::uint64_t> seed_override() {
  const char* s = std::getenv("MIHST_SEED");
  if (!s || !*s) return std::nullopt;
  std::uint64_t v = 0;
  if (!parse_number(std::string(s), v)) throw ConfigError("MIHST_SEED must be a non-negative integer");
  return v;
}

RunConfig RunConfig::from_kv(const KvConfig& kv) {
  RunConfig rc;
  ModelConfig& m = rc.model;
  m.note_vocab = kv.count("note_vocab", m.note_vocab);
  m.text_dim = kv.count("text_dim", m.text_dim);
  m.tab_dim = kv.count("tab_dim", m.tab_dim);
  m.encoder_heads = kv.count("encoder_heads", m.encoder_heads);
  m.chunk_tokens = kv.count("chunk_tokens", m.chunk_tokens);
  m.name_tokens = kv.count("name_tokens", m.name_tokens);
  m.max_chunks = kv.count("max_chunks", m.max_chunks);
  m.fusion_layers = kv.count("fusion_layers", m.fusion_layers);
  m.fusion_heads = kv.count("fusion_heads", m.fusion_heads);
  m.ffn_mult = kv.count("ffn_mult", m.ffn_mult);
  m.negative_slope = kv.real("negative_slope", m.negative_slope);
  m.position_encoding = kv.flag("position_encoding", m.position_encoding);
  m.label_bias = kv.flag("label_bias", m.label_bias);

  TrainConfig& t = rc.train;
  t.learning_rate = kv.real("learning_rate", t.learning_rate);
  t.epochs = kv.count("epochs", t.epochs);
  t.seed = kv.u64("seed", t.seed);
  if (auto s = seed_override()) t.seed = *s;
  t.momentum = kv.real("momentum", t.momentum);
  t.clip_norm = kv.real("clip_norm", t.clip_norm);
  t.shuffle = kv.flag("shuffle", t.shuffle);
  if (auto s = kv.raw("schedule")) t.schedule.kind = TemporalWeightSchedule::parse_kind(*s);
  t.schedule.custom = kv.reals("schedule_weights", t.schedule.custom);
  t.schedule.normalize = kv.flag("normalize_weights", t.schedule.normalize);
  if (t.schedule.kind == TemporalWeightSchedule::Kind::custom && t.schedule.custom.empty())
    throw ConfigError("schedule = custom needs schedule_weights");
  if (!(t.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");

  SelectionThresholds& s = rc.selection;
  s.scale = kv.real("selection_scale", s.scale);
  s.top_k = kv.count("top_k", s.top_k);
  s.lambda_ladder = kv.reals("lambda_ladder", s.lambda_ladder);
  s.decision_threshold = kv.real("decision_threshold", s.decision_threshold);

  rc.cutoffs = kv.reals("cutoffs", rc.cutoffs);
  kv.reject_unknown();
  return rc;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  const KvConfig kv = KvConfig::load(path);
  try {
    return from_kv(kv);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace mihst
