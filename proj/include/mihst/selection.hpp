#pragma once

// Lab feature selection: Yeo-Johnson + standardization of per-stay lab
// summaries, per-code L1-penalized logistic regression, and the three-phase
// threshold-relaxation procedure that turns per-code top variables into a
// final feature list.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mihst/admission.hpp"

namespace mihst {

// ---- Yeo-Johnson ---------------------------------------------------------

double yeo_johnson(double x, double lambda);
double yeo_johnson_inverse(double y, double lambda);
std::vector<double> yeo_johnson(std::span<const double> x, double lambda);

// Gaussian profile log-likelihood of the transformed sample:
// -n/2 log(var) + (lambda - 1) sum sign(x) log(|x| + 1).
double yeo_johnson_log_likelihood(std::span<const double> x, double lambda);

struct YeoJohnsonOptions {
  // Subtract the sample median before fitting and transforming, which makes
  // lambda invariant to a shift of the data.
  bool median_center = true;
  double lambda_min = -5.0;
  double lambda_max = 5.0;
  std::size_t grid_points = 201;
  double tolerance = 1e-4;
};

struct YeoJohnsonFit {
  double lambda = 1.0;
  double center = 0.0;  // subtracted before the transform
  double mean = 0.0;    // of the transformed training sample
  double std = 1.0;

  // Standardized transform of a raw value.
  double operator()(double x) const { return (yeo_johnson(x - center, lambda) - mean) / std; }
};

// Maximizes the profile likelihood on a 201-point grid over [-5, 5], then
// golden-section search around the best grid point. Throws "degenerate
// feature" if the sample has fewer than two distinct values.
YeoJohnsonFit fit_yeo_johnson(std::span<const double> x, const YeoJohnsonOptions& opt = {});

// ---- Design matrix -------------------------------------------------------

enum class VariableKind { mean, mean_diff };

struct DesignColumn {
  std::string feature;
  VariableKind kind = VariableKind::mean;
  std::string label() const;  // "feature:mean" / "feature:mean_diff"
};

struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
  DenseMatrix select_columns(std::span<const std::size_t> cols) const;
};

// Two columns per feature: mean measurement over the stay, and mean of the
// consecutive differences (present only with >= 2 measurements).
struct LabDesignMatrix {
  std::vector<DesignColumn> columns;
  DenseMatrix raw;
  std::vector<std::uint8_t> present;  // rows x cols
  DenseMatrix values;                 // standardized, missing imputed to 0
};

LabDesignMatrix summarize_labs(std::span<const AdmissionRecord> admissions,
                               std::span<const std::string> features);

// Per-column standardizing transform fitted on training rows.
struct DesignTransform {
  std::vector<YeoJohnsonFit> fits;
  std::vector<std::uint8_t> degenerate;  // column maps to 0 everywhere
};

DesignTransform fit_design_transform(const LabDesignMatrix& train);
void apply_design_transform(const DesignTransform& tf, LabDesignMatrix& m);

// summarize + fit on these admissions + apply.
LabDesignMatrix build_design(std::span<const AdmissionRecord> admissions,
                             std::span<const std::string> features);

// ---- L1 logistic regression ---------------------------------------------

struct L1LogRegOptions {
  double tolerance = 1e-9;  // stop when the objective decreases by less
  std::size_t max_iterations = 100000;
  bool record_trace = false;
};

struct L1LogRegModel {
  std::vector<double> coef;
  double intercept = 0.0;
  double lambda = 0.0;
  std::size_t iterations = 0;
  double objective = 0.0;
  bool converged = false;
  std::vector<double> trace;  // objective after each iteration, if recorded

  double predict_proba(const double* row) const;
};

// (1/n) sum log(1 + exp(-(2y-1)(x.beta + b))) + lambda * |beta|_1
double l1_logreg_objective(const DenseMatrix& x, std::span<const std::uint8_t> y,
                           std::span<const double> coef, double intercept, double lambda);

// Smallest lambda with beta = 0 optimal: |X^T (y - mean(y))|_inf / n.
double l1_lambda_max(const DenseMatrix& x, std::span<const std::uint8_t> y);

// Proximal gradient descent with backtracking line search; the intercept is
// not penalized. Hitting the iteration cap leaves converged = false.
L1LogRegModel fit_l1_logreg(const DenseMatrix& x, std::span<const std::uint8_t> y,
                            double lambda, const L1LogRegOptions& opt = {});

// Up to k column ids by descending |coef|, ties by ascending id, zero
// coefficients excluded.
std::vector<std::size_t> top_variables(const L1LogRegModel& model, std::size_t k);

// ---- Three-phase selection -----------------------------------------------

struct SelectionThresholds {
  double phase0_admissions = 5000;  // candidates: measured in > this many stays
  double phase1_admissions = 2000;
  double phase2_admissions = 500;
  double keep_codes = 20;        // phase-0 list: important for >= this many codes
  double final_codes = 10;       // final list: important for >= this many codes
  double low_score_codes = 5;    // ... or for >= this many low-scoring codes
  double phase1_score = 30;      // retrain codes scoring below (0-100)
  double phase2_score = 20;
  std::size_t top_k = 10;
  // Multiplies every admission-count and code-count threshold above.
  double scale = 1.0;
  std::vector<double> lambda_ladder = {1e-4, 5.623413251903491e-4, 3.1622776601683794e-3,
                                       1.778279410038923e-2, 1e-1};
  double decision_threshold = 0.5;

  // Copy with `scale` folded into the count thresholds (scale becomes 1).
  SelectionThresholds effective() const;
  nlohmann::ordered_json to_json() const;
  static SelectionThresholds from_json(const nlohmann::ordered_json& j);
};

// Result of fitting one code's model on one candidate feature set.
struct CodeFit {
  double score = 0.0;                       // dev F1, 0-100
  std::vector<std::string> top_variables;   // DesignColumn labels, ranked
  std::vector<std::string> important;       // distinct features among them
  double lambda = 0.0;
};

using CodeFitter =
    std::function<CodeFit(std::size_t code, const std::vector<std::string>& candidates)>;

struct CodeState {
  std::string code;
  CodeFit fit;
  int phase = 0;  // phase whose fit is current
};

struct PhaseRecord {
  int phase = 0;
  double admission_threshold = 0.0;
  std::vector<std::string> candidates;
  std::vector<std::string> retrained;  // codes refit in this phase
  std::vector<std::string> updated;    // ... whose score improved
  std::vector<CodeState> codes;        // state after the phase
  std::map<std::string, std::size_t> importance;  // feature -> #codes
  std::vector<std::string> selected;  // phase 0: important for >= keep_codes
};

struct FeatureSelectionReport {
  SelectionThresholds thresholds;  // effective (scaled) values
  std::map<std::string, std::size_t> admission_counts;
  std::vector<PhaseRecord> phases;
  std::vector<std::string> low_score_codes;  // phase-0 score < phase1_score
  std::vector<std::string> final_features;

  nlohmann::ordered_json to_json() const;
  static FeatureSelectionReport from_json(const nlohmann::ordered_json& j);
  void save(const std::filesystem::path& path) const;
  static FeatureSelectionReport load(const std::filesystem::path& path);
};

// Importance counts: for each feature, the number of codes whose current
// top list contains at least one of its variables.
std::map<std::string, std::size_t> importance_counts(std::span<const CodeState> codes);

// The procedure itself, independent of how per-code models are fit.
FeatureSelectionReport run_selection(const std::vector<std::string>& codes,
                                     const std::map<std::string, std::size_t>& admission_counts,
                                     const CodeFitter& fitter, const SelectionThresholds& th);

// Final list rebuilt from the last phase's recorded code states.
std::vector<std::string> recompute_final_features(const FeatureSelectionReport& report);

// Number of training admissions with at least one measurement per feature.
std::map<std::string, std::size_t> count_admissions(std::span<const AdmissionRecord> adms);

// End to end on admission data: dev F1 at decision_threshold picks lambda
// from the ladder per code.
FeatureSelectionReport select_features(std::span<const AdmissionRecord> train,
                                       std::span<const AdmissionRecord> dev,
                                       const LabelVocabulary& labels,
                                       const SelectionThresholds& th);

void write_feature_list(const std::filesystem::path& path, std::span<const std::string> features);
std::vector<std::string> read_feature_list(const std::filesystem::path& path);

}  // namespace mihst
