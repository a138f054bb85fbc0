#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mihst/model.hpp"

namespace mihst {

// Per-position weights w_t of the temporal loss.
struct TemporalWeightSchedule {
  enum class Kind { uniform, linear_ramp, final_only, custom };
  Kind kind = Kind::linear_ramp;
  // custom: weight of position t (0-based); positions past the end reuse the
  // last entry.
  std::vector<double> custom;
  // Divide by the weight total; otherwise the weighted sum is returned.
  bool normalize = true;

  // Weights for a sequence of n positions. linear_ramp gives w_t = t (1-based).
  // Throws if any weight is negative or all are zero.
  std::vector<double> weights(std::size_t n) const;

  static Kind parse_kind(const std::string& name);
  static std::string kind_name(Kind k);
};

// sum_t w_t * BCE_t / sum_t w_t with
// BCE_t = -(1/L) sum_l [y_l log p_tl + (1 - y_l) log(1 - p_tl)],
// log arguments clamped at 1e-12. `probs` is [n x L].
Tensor weighted_temporal_bce(const Tensor& probs, std::span<const std::uint8_t> labels,
                             const TemporalWeightSchedule& schedule);

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  double momentum = 0.9;
  double clip_norm = 1.0;
  bool shuffle = true;
  TemporalWeightSchedule schedule;
};

struct TrainResult {
  std::vector<double> epoch_loss;  // mean loss per epoch
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

// Per-admission SGD with momentum and global gradient-norm clipping. Notes
// are truncated to the first cfg.max_chunks per admission. Throws with
// epoch/admission context on a non-finite loss.
TrainResult train(MihstModel& model, const Preprocessor& prep,
                  std::span<const AdmissionRecord> data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

// Row-major 0/1 matrix (admissions x labels).
struct BinaryMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> data;

  BinaryMatrix() = default;
  BinaryMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0) {}
  std::uint8_t& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  std::uint8_t at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// 100 * 2TP / (2TP + FP + FN); 100 when TP = FP = FN = 0.
double f1_score(std::size_t tp, std::size_t fp, std::size_t fn);

// Micro-F1 over all cells on the 0-100 scale.
double micro_f1(const BinaryMatrix& pred, const BinaryMatrix& gold);

struct EvalReport {
  double micro_f1 = 0.0;
  std::vector<double> per_label_f1;
  double threshold = 0.5;
  std::optional<double> time_cutoff;
  BinaryMatrix predicted;
  BinaryMatrix gold;

  nlohmann::ordered_json to_json() const;
};

// Binarizes (p >= threshold) the predictions at the last position whose time
// is <= cutoff, or the final position without a cutoff.
EvalReport evaluate(const MihstModel& model, const Preprocessor& prep,
                    std::span<const AdmissionRecord> data, double threshold,
                    std::optional<double> time_cutoff = std::nullopt);

}  // namespace mihst
