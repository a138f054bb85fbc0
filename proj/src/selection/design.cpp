#include <algorithm>
#include <unordered_map>

#include "mihst/error.hpp"
#include "mihst/selection.hpp"

namespace mihst {

std::string DesignColumn::label() const {
  return feature + (kind == VariableKind::mean ? ":mean" : ":mean_diff");
}

DenseMatrix DenseMatrix::select_columns(std::span<const std::size_t> ids) const {
  DenseMatrix out(rows, ids.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < ids.size(); ++j) out.at(r, j) = at(r, ids[j]);
  return out;
}

LabDesignMatrix summarize_labs(std::span<const AdmissionRecord> admissions,
                               std::span<const std::string> features) {
  LabDesignMatrix m;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& f : features) {
    if (!slot.emplace(f, slot.size()).second) throw Error("duplicate feature '" + f + "'");
    m.columns.push_back({f, VariableKind::mean});
    m.columns.push_back({f, VariableKind::mean_diff});
  }
  const std::size_t cols = m.columns.size();
  m.raw = DenseMatrix(admissions.size(), cols);
  m.present.assign(admissions.size() * cols, 0);

  std::vector<std::vector<double>> series(features.size());
  for (std::size_t r = 0; r < admissions.size(); ++r) {
    for (auto& s : series) s.clear();
    // events are kept in time order with ties in input order
    for (const auto& ev : admissions[r].events) {
      if (!ev.is_lab()) continue;
      auto it = slot.find(ev.feature);
      if (it != slot.end()) series[it->second].push_back(ev.value);
    }
    for (std::size_t f = 0; f < series.size(); ++f) {
      const auto& s = series[f];
      if (s.empty()) continue;
      double sum = 0.0;
      for (double v : s) sum += v;
      m.raw.at(r, 2 * f) = sum / static_cast<double>(s.size());
      m.present[r * cols + 2 * f] = 1;
      if (s.size() >= 2) {
        double d = 0.0;
        for (std::size_t i = 1; i < s.size(); ++i) d += s[i] - s[i - 1];
        m.raw.at(r, 2 * f + 1) = d / static_cast<double>(s.size() - 1);
        m.present[r * cols + 2 * f + 1] = 1;
      }
    }
  }
  m.values = DenseMatrix(admissions.size(), cols);
  return m;
}

DesignTransform fit_design_transform(const LabDesignMatrix& train) {
  const std::size_t cols = train.columns.size();
  DesignTransform tf;
  tf.fits.resize(cols);
  tf.degenerate.assign(cols, 0);
  std::vector<double> v;
  for (std::size_t c = 0; c < cols; ++c) {
    v.clear();
    for (std::size_t r = 0; r < train.raw.rows; ++r)
      if (train.present[r * cols + c]) v.push_back(train.raw.at(r, c));
    const bool distinct =
        v.size() >= 2 && std::any_of(v.begin(), v.end(), [&](double x) { return x != v[0]; });
    if (!distinct) {
      tf.degenerate[c] = 1;
      continue;
    }
    tf.fits[c] = fit_yeo_johnson(v);
  }
  return tf;
}

void apply_design_transform(const DesignTransform& tf, LabDesignMatrix& m) {
  const std::size_t cols = m.columns.size();
  if (tf.fits.size() != cols) throw DimensionError("design transform has wrong column count");
  m.values = DenseMatrix(m.raw.rows, cols);
  for (std::size_t r = 0; r < m.raw.rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      if (m.present[r * cols + c] && !tf.degenerate[c]) m.values.at(r, c) = tf.fits[c](m.raw.at(r, c));
}

LabDesignMatrix build_design(std::span<const AdmissionRecord> admissions,
                             std::span<const std::string> features) {
  LabDesignMatrix m = summarize_labs(admissions, features);
  apply_design_transform(fit_design_transform(m), m);
  return m;
}

}  // namespace mihst
