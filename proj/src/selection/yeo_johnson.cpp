#include <algorithm>
#include <cmath>
#include <limits>

#include "mihst/error.hpp"
#include "mihst/selection.hpp"

namespace mihst {

double yeo_johnson(double x, double lambda) {
  if (x >= 0.0) {
    if (lambda == 0.0) return std::log1p(x);
    return std::expm1(lambda * std::log1p(x)) / lambda;
  }
  const double m = 2.0 - lambda;
  if (m == 0.0) return -std::log1p(-x);
  return -std::expm1(m * std::log1p(-x)) / m;
}

double yeo_johnson_inverse(double y, double lambda) {
  if (y >= 0.0) {
    if (lambda == 0.0) return std::expm1(y);
    return std::expm1(std::log1p(lambda * y) / lambda);
  }
  const double m = 2.0 - lambda;
  if (m == 0.0) return -std::expm1(-y);
  return -std::expm1(std::log1p(-m * y) / m);
}

std::vector<double> yeo_johnson(std::span<const double> x, double lambda) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = yeo_johnson(x[i], lambda);
  return out;
}

double yeo_johnson_log_likelihood(std::span<const double> x, double lambda) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  double jac = 0.0;
  std::vector<double> t(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    t[i] = yeo_johnson(x[i], lambda);
    mean += t[i];
    jac += std::copysign(std::log1p(std::fabs(x[i])), x[i]);
  }
  mean /= n;
  double var = 0.0;
  for (double v : t) var += (v - mean) * (v - mean);
  var /= n;
  if (!std::isfinite(var) || var <= 0.0) return -std::numeric_limits<double>::infinity();
  return -0.5 * n * std::log(var) + (lambda - 1.0) * jac;
}

namespace {

double median_of(std::span<const double> x) {
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  return n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

}  // namespace

YeoJohnsonFit fit_yeo_johnson(std::span<const double> x, const YeoJohnsonOptions& opt) {
  if (x.size() < 2 || std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }))
    throw Error("degenerate feature");

  YeoJohnsonFit fit;
  fit.center = opt.median_center ? median_of(x) : 0.0;
  std::vector<double> xc(x.begin(), x.end());
  for (double& v : xc) v -= fit.center;

  auto ll = [&](double lam) { return yeo_johnson_log_likelihood(xc, lam); };

  const std::size_t g = std::max<std::size_t>(opt.grid_points, 2);
  const double step = (opt.lambda_max - opt.lambda_min) / static_cast<double>(g - 1);
  std::size_t best = 0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g; ++i) {
    const double v = ll(opt.lambda_min + step * static_cast<double>(i));
    if (v > best_ll) {
      best_ll = v;
      best = i;
    }
  }
  double lambda = opt.lambda_min + step * static_cast<double>(best);

  // golden section on the bracket around the best grid point
  double a = std::max(opt.lambda_min, lambda - step);
  double b = std::min(opt.lambda_max, lambda + step);
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = ll(c), fd = ll(d);
  while (b - a > opt.tolerance) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = ll(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = ll(d);
    }
  }
  const double refined = 0.5 * (a + b);
  if (ll(refined) >= best_ll) lambda = refined;
  fit.lambda = lambda;

  double mean = 0.0;
  for (double v : xc) mean += yeo_johnson(v, lambda);
  mean /= static_cast<double>(xc.size());
  double var = 0.0;
  for (double v : xc) {
    const double t = yeo_johnson(v, lambda) - mean;
    var += t * t;
  }
  var /= static_cast<double>(xc.size());
  if (!(var > 0.0) || !std::isfinite(var)) throw Error("degenerate feature");
  fit.mean = mean;
  fit.std = std::sqrt(var);
  return fit;
}

}  // namespace mihst
