#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mihst/kernels.hpp"
#include "mihst/training.hpp"

namespace mihst {

TrainResult train(MihstModel& model, const Preprocessor& prep,
                  std::span<const AdmissionRecord> data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  if (data.empty()) throw ConfigError("training set is empty");
  if (!(cfg.learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (prep.labels.size() != model.cfg.labels) {
    throw ConfigError("model has " + std::to_string(model.cfg.labels) + " labels, vocabulary has " +
                      std::to_string(prep.labels.size()));
  }

  std::vector<ModelInput> inputs;
  std::vector<std::vector<std::uint8_t>> targets;
  inputs.reserve(data.size());
  for (const auto& adm : data) {
    inputs.push_back(prep.prepare(adm, model.cfg, model.cfg.max_chunks));
    targets.push_back(prep.targets(adm));
  }

  NamedParams params = model.params();
  std::vector<std::vector<double>> velocity;
  velocity.reserve(params.size());
  for (const auto& [name, t] : params) velocity.emplace_back(t.size(), 0.0);

  const auto& kt = kernels::active();
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  Tape tape;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t idx : order) {
      for (auto& [name, t] : params) t.zero_grad();
      tape.reset();
      Tensor loss;
      {
        TapeScope scope(tape);
        loss = weighted_temporal_bce(model.forward(inputs[idx]).probs, targets[idx], cfg.schedule);
      }
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw Error("non-finite loss at epoch " + std::to_string(epoch + 1) + ", admission " +
                    data[idx].admission_id);
      }
      total += value;
      tape.backward(loss);

      double sq = 0.0;
      for (const auto& [name, t] : params) sq += kt.sum_squares(t.grad().data(), t.size());
      const double norm = std::sqrt(sq);
      const double factor = (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) ? cfg.clip_norm / norm : 1.0;

      for (std::size_t i = 0; i < params.size(); ++i) {
        auto& v = velocity[i];
        auto g = params[i].second.grad();
        auto p = params[i].second.data_mut();
        kt.scale(cfg.momentum, v.data(), v.data(), v.size());
        kt.axpy(factor, g.data(), v.data(), v.size());
        kt.axpy(-cfg.learning_rate, v.data(), p.data(), p.size());
      }
    }
    result.epoch_loss.push_back(total / static_cast<double>(data.size()));
    if (on_epoch) on_epoch(epoch + 1, result.epoch_loss.back());
  }
  return result;
}

}  // namespace mihst
