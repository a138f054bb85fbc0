#include "mihst/binning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mihst/error.hpp"

namespace mihst {

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error("quantile of an empty sample");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

FeatureBins fit_feature_bins(std::vector<double> values) {
  if (values.empty()) throw Error("cannot fit bins on an empty sample");
  std::sort(values.begin(), values.end());
  FeatureBins fb;
  fb.count = values.size();
  fb.min = values.front();
  fb.max = values.back();
  double s = 0.0;
  for (double v : values) s += v;
  fb.mean = s / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - fb.mean) * (v - fb.mean);
  fb.std = std::sqrt(ss / static_cast<double>(values.size()));

  fb.edges.resize(kNumBins - 1);
  for (int k = 1; k < kNumBins; ++k) {
    fb.edges[k - 1] = quantile_sorted(values, static_cast<double>(k) / kNumBins);
  }

  // Knot y-values: rank / (n - 1), averaged over runs of equal values.
  const std::size_t n = values.size();
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[j + 1] == values[i]) ++j;
    double y = 0.5;
    if (n > 1) y = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 / static_cast<double>(n - 1);
    fb.knots_x.push_back(values[i]);
    fb.knots_y.push_back(y);
    i = j + 1;
  }
  return fb;
}

const FeatureBins& BinningTable::at(const std::string& feature) const {
  auto it = features_.find(feature);
  if (it == features_.end()) throw Error("feature '" + feature + "' not in binning table");
  return it->second;
}

void BinningTable::set(std::string feature, FeatureBins bins) {
  features_[std::move(feature)] = std::move(bins);
}

BinnedValue BinningTable::bin_and_normalize(const std::string& feature, double value) const {
  const FeatureBins& fb = at(feature);
  const auto below = std::lower_bound(fb.edges.begin(), fb.edges.end(), value) - fb.edges.begin();
  BinnedValue out;
  out.bin = std::clamp(1 + static_cast<int>(below), 1, kNumBins);

  const auto& xs = fb.knots_x;
  const auto& ys = fb.knots_y;
  if (value < xs.front()) {
    out.x_norm = 0.0;
  } else if (value > xs.back()) {
    out.x_norm = 1.0;
  } else {
    const auto hi = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), value) - xs.begin());
    if (xs[hi] == value) {
      out.x_norm = ys[hi];
    } else {
      const std::size_t lo = hi - 1;
      const double t = (value - xs[lo]) / (xs[hi] - xs[lo]);
      out.x_norm = ys[lo] + t * (ys[hi] - ys[lo]);
    }
  }
  out.x_norm = std::clamp(out.x_norm, 0.0, 1.0);
  return out;
}

nlohmann::ordered_json BinningTable::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "mihst-binning";
  j["version"] = 1;
  auto feats = nlohmann::ordered_json::object();
  for (const auto& [name, fb] : features_) {
    nlohmann::ordered_json f;
    f["count"] = fb.count;
    f["min"] = fb.min;
    f["max"] = fb.max;
    f["mean"] = fb.mean;
    f["std"] = fb.std;
    f["edges"] = fb.edges;
    f["knots_x"] = fb.knots_x;
    f["knots_y"] = fb.knots_y;
    feats[name] = std::move(f);
  }
  j["features"] = std::move(feats);
  return j;
}

BinningTable BinningTable::from_json(const nlohmann::ordered_json& j) {
  if (j.value("version", 0) != 1) throw ParseError("unsupported binning table version", 0);
  BinningTable t;
  for (const auto& [name, f] : j.at("features").items()) {
    FeatureBins fb;
    fb.count = f.at("count").get<std::size_t>();
    fb.min = f.at("min").get<double>();
    fb.max = f.at("max").get<double>();
    fb.mean = f.at("mean").get<double>();
    fb.std = f.at("std").get<double>();
    fb.edges = f.at("edges").get<std::vector<double>>();
    fb.knots_x = f.at("knots_x").get<std::vector<double>>();
    fb.knots_y = f.at("knots_y").get<std::vector<double>>();
    if (fb.edges.size() != kNumBins - 1 || fb.knots_x.empty() ||
        fb.knots_x.size() != fb.knots_y.size()) {
      throw ParseError("malformed bins for feature '" + name + "'", 0);
    }
    t.set(name, std::move(fb));
  }
  return t;
}

void BinningTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write binning table " + path.string());
  out << to_json().dump(1) << '\n';
}

BinningTable BinningTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open binning table " + path.string());
  return from_json(nlohmann::ordered_json::parse(in));
}

BinningTable fit_binning(std::span<const AdmissionRecord> train,
                         const std::set<std::string>& whitelist) {
  std::map<std::string, std::vector<double>> samples;
  for (const auto& name : whitelist) samples[name];
  for (const auto& adm : train) {
    for (const auto& e : adm.events) {
      if (!e.is_lab()) continue;
      auto it = samples.find(e.feature);
      if (it != samples.end()) it->second.push_back(e.value);
    }
  }
  BinningTable table;
  for (auto& [name, values] : samples) {
    if (values.empty()) {
      throw Error("feature '" + name + "' has no training observations");
    }
    table.set(name, fit_feature_bins(std::move(values)));
  }
  return table;
}

}  // namespace mihst
