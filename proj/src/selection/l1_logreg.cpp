#include <algorithm>
#include <cmath>
#include <numeric>

#include "mihst/error.hpp"
#include "mihst/kernels.hpp"
#include "mihst/selection.hpp"

namespace mihst {

namespace {

double softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::fabs(v))); }

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

double l1_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::fabs(x);
  return s;
}

// Mean logistic loss; fills z with the linear predictor.
double smooth_loss(const DenseMatrix& x, std::span<const std::uint8_t> y,
                   std::span<const double> coef, double intercept, std::vector<double>& z) {
  const auto& k = kernels::active();
  z.resize(x.rows);
  double loss = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    z[i] = (x.cols ? k.dot(x.row(i), coef.data(), x.cols) : 0.0) + intercept;
    loss += softplus(y[i] ? -z[i] : z[i]);
  }
  return loss / static_cast<double>(x.rows);
}

void check_inputs(const DenseMatrix& x, std::span<const std::uint8_t> y) {
  if (x.rows == 0) throw Error("L1 logistic regression needs at least one row");
  if (y.size() != x.rows)
    throw DimensionError("label vector has " + std::to_string(y.size()) + " entries for " +
                         std::to_string(x.rows) + " rows");
  for (auto v : y)
    if (v > 1) throw Error("labels must be 0 or 1");
  for (double v : x.data)
    if (!std::isfinite(v)) throw Error("design matrix has a non-finite entry");
}

}  // namespace

double L1LogRegModel::predict_proba(const double* row) const {
  double z = intercept;
  if (!coef.empty()) z += kernels::active().dot(row, coef.data(), coef.size());
  return sigmoid(z);
}

double l1_logreg_objective(const DenseMatrix& x, std::span<const std::uint8_t> y,
                           std::span<const double> coef, double intercept, double lambda) {
  check_inputs(x, y);
  if (coef.size() != x.cols) throw DimensionError("coefficient count does not match columns");
  std::vector<double> z;
  return smooth_loss(x, y, coef, intercept, z) + lambda * l1_norm(coef);
}

double l1_lambda_max(const DenseMatrix& x, std::span<const std::uint8_t> y) {
  check_inputs(x, y);
  const double n = static_cast<double>(x.rows);
  const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / n;
  std::vector<double> g(x.cols, 0.0);
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < x.rows; ++i) k.axpy(static_cast<double>(y[i]) - ybar, x.row(i), g.data(), x.cols);
  double m = 0.0;
  for (double v : g) m = std::max(m, std::fabs(v));
  return m / n;
}

L1LogRegModel fit_l1_logreg(const DenseMatrix& x, std::span<const std::uint8_t> y, double lambda,
                            const L1LogRegOptions& opt) {
  check_inputs(x, y);
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error("penalty must be finite and >= 0");
  const std::size_t n = x.rows, p = x.cols;
  const double nd = static_cast<double>(n);
  const auto& k = kernels::active();

  L1LogRegModel m;
  m.lambda = lambda;
  m.coef.assign(p, 0.0);

  if (lambda >= l1_lambda_max(x, y)) {
    // beta = 0 satisfies the optimality conditions; only the intercept moves
    double ybar = std::accumulate(y.begin(), y.end(), 0.0) / nd;
    ybar = std::clamp(ybar, 1e-12, 1.0 - 1e-12);
    m.intercept = std::log(ybar / (1.0 - ybar));
    m.objective = l1_logreg_objective(x, y, m.coef, m.intercept, lambda);
    m.converged = true;
    if (opt.record_trace) m.trace.push_back(m.objective);
    return m;
  }

  // 1/L upper bound from the Frobenius norm of [X 1]
  double fro = nd;
  for (double v : x.data) fro += v * v;
  const double s0 = 4.0 * nd / fro;
  double step = s0;

  std::vector<double> z, z_new, r(n), g(p), beta_new(p);
  double f = smooth_loss(x, y, m.coef, m.intercept, z);
  double obj = f;
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    double gb = 0.0;
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = sigmoid(z[i]) - static_cast<double>(y[i]);
      gb += r[i];
      k.axpy(r[i], x.row(i), g.data(), p);
    }
    gb /= nd;
    for (double& v : g) v /= nd;

    step = std::min(step * 2.0, s0 * 1e6);
    double f_new = 0.0, b_new = 0.0;
    bool accepted = false;
    while (step > s0 * 1e-12) {
      for (std::size_t j = 0; j < p; ++j)
        beta_new[j] = soft_threshold(m.coef[j] - step * g[j], step * lambda);
      b_new = m.intercept - step * gb;
      double lin = gb * (b_new - m.intercept);
      double sq = (b_new - m.intercept) * (b_new - m.intercept);
      for (std::size_t j = 0; j < p; ++j) {
        const double d = beta_new[j] - m.coef[j];
        lin += g[j] * d;
        sq += d * d;
      }
      f_new = smooth_loss(x, y, beta_new, b_new, z_new);
      if (f_new <= f + lin + sq / (2.0 * step)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    const double obj_new = f_new + lambda * l1_norm(beta_new);
    if (!accepted || !(obj_new <= obj)) {
      // no representable progress left
      m.converged = true;
      break;
    }
    const double decrease = obj - obj_new;
    m.coef.swap(beta_new);
    m.intercept = b_new;
    z.swap(z_new);
    f = f_new;
    obj = obj_new;
    m.iterations = it + 1;
    if (opt.record_trace) m.trace.push_back(obj);
    if (decrease < opt.tolerance) {
      m.converged = true;
      break;
    }
  }
  m.objective = obj;
  return m;
}

std::vector<std::size_t> top_variables(const L1LogRegModel& model, std::size_t k) {
  if (k == 0) throw ConfigError("top_variables: k must be >= 1");
  std::vector<std::size_t> ids;
  for (std::size_t j = 0; j < model.coef.size(); ++j)
    if (model.coef[j] != 0.0) ids.push_back(j);
  std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    return std::fabs(model.coef[a]) > std::fabs(model.coef[b]);
  });
  if (ids.size() > k) ids.resize(k);
  return ids;
}

}  // namespace mihst
