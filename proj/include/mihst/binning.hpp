#pragma once

// Quantile binning and CDF normalization of lab measurements. Each feature
// gets 255 interior edges at training quantiles k/256 (k = 1..255), so a
// value falls in one of 256 bins numbered 1..256, plus an empirical CDF used
// as the normalized value in [0, 1].

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mihst/admission.hpp"

namespace mihst {

inline constexpr int kNumBins = 256;

struct FeatureBins {
  std::vector<double> edges;  // 255 non-decreasing
  std::vector<double> knots_x;  // strictly increasing distinct training values
  std::vector<double> knots_y;  // mid-rank CDF at each knot
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

struct BinnedValue {
  int bin = 1;
  double x_norm = 0.0;
};

class BinningTable {
 public:
  bool contains(const std::string& feature) const { return features_.count(feature) > 0; }
  const FeatureBins& at(const std::string& feature) const;
  const std::map<std::string, FeatureBins>& features() const noexcept { return features_; }
  void set(std::string feature, FeatureBins bins);

  // bin = 1 + #{edges < value} clamped to [1, 256]; x_norm = CDF(value)
  // interpolated between knots, 0 below the training min, 1 above the max.
  BinnedValue bin_and_normalize(const std::string& feature, double value) const;

  nlohmann::ordered_json to_json() const;
  static BinningTable from_json(const nlohmann::ordered_json& j);
  void save(const std::filesystem::path& path) const;
  static BinningTable load(const std::filesystem::path& path);

 private:
  std::map<std::string, FeatureBins> features_;
};

// Linear-interpolation quantile of a sorted sample (numpy "linear" method).
double quantile_sorted(std::span<const double> sorted, double p);

FeatureBins fit_feature_bins(std::vector<double> values);

// Fits every whitelisted feature on all of its training measurements.
// Throws when a whitelisted feature has no observations.
BinningTable fit_binning(std::span<const AdmissionRecord> train,
                         const std::set<std::string>& whitelist);

}  // namespace mihst
