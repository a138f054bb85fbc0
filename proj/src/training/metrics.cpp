#include "mihst/training.hpp"

namespace mihst {

double f1_score(std::size_t tp, std::size_t fp, std::size_t fn) {
  if (tp == 0 && fp == 0 && fn == 0) return 100.0;
  const double num = 2.0 * static_cast<double>(tp);
  return 100.0 * num / (num + static_cast<double>(fp) + static_cast<double>(fn));
}

double micro_f1(const BinaryMatrix& pred, const BinaryMatrix& gold) {
  if (pred.rows != gold.rows || pred.cols != gold.cols ||
      pred.data.size() != gold.data.size()) {
    throw DimensionError("micro_f1: prediction [" + std::to_string(pred.rows) + "x" +
                         std::to_string(pred.cols) + "] vs gold [" + std::to_string(gold.rows) +
                         "x" + std::to_string(gold.cols) + "]");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] != 0, g = gold.data[i] != 0;
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
  }
  return f1_score(tp, fp, fn);
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["micro_f1"] = micro_f1;
  j["per_label_f1"] = per_label_f1;
  j["threshold"] = threshold;
  j["time_cutoff"] = time_cutoff ? nlohmann::ordered_json(*time_cutoff) : nlohmann::ordered_json();
  return j;
}

EvalReport evaluate(const MihstModel& model, const Preprocessor& prep,
                    std::span<const AdmissionRecord> data, double threshold,
                    std::optional<double> time_cutoff) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must be in (0,1)");
  const std::size_t L = prep.labels.size();
  EvalReport rep;
  rep.threshold = threshold;
  rep.time_cutoff = time_cutoff;
  rep.predicted = BinaryMatrix(data.size(), L);
  rep.gold = BinaryMatrix(data.size(), L);
  for (std::size_t a = 0; a < data.size(); ++a) {
    const ModelInput in = prep.prepare(data[a], model.cfg);
    const TemporalPrediction pred = model.forward(in);
    std::size_t row = pred.positions() - 1;
    if (time_cutoff) {
      std::size_t seen = 0;
      while (seen < pred.positions() && pred.times[seen] <= *time_cutoff) ++seen;
      if (seen == 0) {
        throw Error("admission " + data[a].admission_id + ": no observed events before cutoff");
      }
      row = seen - 1;
    }
    const auto gold = prep.targets(data[a]);
    for (std::size_t l = 0; l < L; ++l) {
      rep.predicted.at(a, l) = pred.probs(row, l) >= threshold ? 1 : 0;
      rep.gold.at(a, l) = gold[l];
    }
  }
  rep.micro_f1 = micro_f1(rep.predicted, rep.gold);
  rep.per_label_f1.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t a = 0; a < data.size(); ++a) {
      const bool p = rep.predicted.at(a, l), g = rep.gold.at(a, l);
      tp += p && g;
      fp += p && !g;
      fn += !p && g;
    }
    rep.per_label_f1[l] = f1_score(tp, fp, fn);
  }
  return rep;
}

}  // namespace mihst
