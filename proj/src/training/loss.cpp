#include <algorithm>
#include <cmath>

#include "mihst/training.hpp"

namespace mihst {

std::vector<double> TemporalWeightSchedule::weights(std::size_t n) const {
  std::vector<double> w(n, 0.0);
  switch (kind) {
    case Kind::uniform:
      std::fill(w.begin(), w.end(), 1.0);
      break;
    case Kind::linear_ramp:
      for (std::size_t t = 0; t < n; ++t) w[t] = static_cast<double>(t + 1);
      break;
    case Kind::final_only:
      if (n) w[n - 1] = 1.0;
      break;
    case Kind::custom:
      if (custom.empty()) throw ConfigError("custom temporal schedule has no weights");
      for (std::size_t t = 0; t < n; ++t) w[t] = custom[std::min(t, custom.size() - 1)];
      break;
  }
  double total = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("temporal weights must be finite and >= 0");
    total += v;
  }
  if (!(total > 0.0)) throw ConfigError("temporal weights are all zero");
  return w;
}

TemporalWeightSchedule::Kind TemporalWeightSchedule::parse_kind(const std::string& name) {
  if (name == "uniform") return Kind::uniform;
  if (name == "linear_ramp") return Kind::linear_ramp;
  if (name == "final_only") return Kind::final_only;
  if (name == "custom") return Kind::custom;
  throw ConfigError("unknown temporal schedule '" + name + "'");
}

std::string TemporalWeightSchedule::kind_name(Kind k) {
  switch (k) {
    case Kind::uniform: return "uniform";
    case Kind::linear_ramp: return "linear_ramp";
    case Kind::final_only: return "final_only";
    case Kind::custom: return "custom";
  }
  return "?";
}

Tensor weighted_temporal_bce(const Tensor& probs, std::span<const std::uint8_t> labels,
                             const TemporalWeightSchedule& schedule) {
  constexpr double kFloor = 1e-12;
  const std::size_t n = probs.rows(), L = probs.cols();
  if (labels.size() != L) {
    throw DimensionError("weighted_temporal_bce: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(L) + " prediction columns");
  }
  std::vector<double> w = schedule.weights(n);
  double wsum = 1.0;
  if (schedule.normalize) {
    wsum = 0.0;
    for (double v : w) wsum += v;
  }
  auto p = probs.data();
  double loss = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    if (w[t] == 0.0) continue;
    double bce = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
      const double pt = p[t * L + l];
      bce -= labels[l] ? std::log(std::max(pt, kFloor)) : std::log(std::max(1.0 - pt, kFloor));
    }
    loss += w[t] * (bce / static_cast<double>(L));
  }
  loss /= wsum;
  std::vector<std::uint8_t> y(labels.begin(), labels.end());
  return make_result({1, 1}, {loss}, {probs},
                     [probs, y = std::move(y), w = std::move(w), wsum, n, L](const Tensor& out) {
                       if (!probs.requires_grad()) return;
                       const double g = out.grad()[0];
                       auto p = probs.data();
                       auto gp = probs.grad_mut();
                       for (std::size_t t = 0; t < n; ++t) {
                         const double c = g * w[t] / wsum / static_cast<double>(L);
                         if (c == 0.0) continue;
                         for (std::size_t l = 0; l < L; ++l) {
                           const double pt = p[t * L + l];
                           if (y[l]) {
                             if (pt > kFloor) gp[t * L + l] -= c / pt;
                           } else if (1.0 - pt > kFloor) {
                             gp[t * L + l] += c / (1.0 - pt);
                           }
                         }
                       }
                     });
}

}  // namespace mihst
