#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "mihst/selection.hpp"

namespace testing::solver {

using mihst::DenseMatrix;

inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// Objective written out directly from its definition.
inline double objective(const DenseMatrix& x, const std::vector<std::uint8_t>& y, const std::vector<double>& beta,
                 double b, double lambda) {
  double s = 0.0;
  for (std::size_t r = 0; r < x.rows; ++r) {
    double z = b;
    for (std::size_t c = 0; c < x.cols; ++c) z += x.at(r, c) * beta[c];
    s += softplus(y[r] ? -z : z);
  }
  double l1 = 0.0;
  for (double v : beta) l1 += std::fabs(v);
  return s / static_cast<double>(x.rows) + lambda * l1;
}

// Convex grid search: a full grid, then repeated zooms around the best point.
// point layout is {beta..., intercept}.
inline std::pair<std::vector<double>, double> grid_minimize(const std::function<double(const std::vector<double>&)>& f,
                                                     std::size_t dim, std::size_t half_points, double half_width,
                                                     double final_step) {
  std::vector<double> center(dim, 0.0);
  double best = f(center);
  double step = half_width / static_cast<double>(half_points);
  while (true) {
    const std::size_t side = 2 * half_points + 1;
    std::size_t total = 1;
    for (std::size_t d = 0; d < dim; ++d) total *= side;
    std::vector<double> p(dim), arg = center;
    for (std::size_t idx = 0; idx < total; ++idx) {
      std::size_t rem = idx;
      for (std::size_t d = 0; d < dim; ++d) {
        p[d] = center[d] + step * (static_cast<double>(rem % side) - static_cast<double>(half_points));
        rem /= side;
      }
      const double v = f(p);
      if (v < best) {
        best = v;
        arg = p;
      }
    }
    center = arg;
    if (step <= final_step * 1.0000001) break;
    // next level spans two old steps either side
    step = 2.0 * step / static_cast<double>(half_points);
  }
  return {center, best};
}

struct Problem {
  DenseMatrix x;
  std::vector<std::uint8_t> y;
};

inline Problem random_problem(std::mt19937_64& rng, std::size_t n, std::size_t p, bool integer = false) {
  Problem pr{DenseMatrix(n, p), std::vector<std::uint8_t>(n)};
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(p);
  for (auto& v : w) v = g(rng);
  for (std::size_t r = 0; r < n; ++r) {
    double z = 0.3;
    for (std::size_t c = 0; c < p; ++c) {
      pr.x.at(r, c) = integer ? static_cast<double>(static_cast<int>(rng() % 7) - 3) : g(rng);
      z += w[c] * pr.x.at(r, c);
    }
    pr.y[r] = u(rng) < 1.0 / (1.0 + std::exp(-z));
  }
  return pr;
}

}  // namespace testing::solver
