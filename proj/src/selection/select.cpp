#include <algorithm>
#include <fstream>
#include <future>
#include <set>
#include <thread>
#include <unordered_map>

#include "mihst/error.hpp"
#include "mihst/selection.hpp"
#include "mihst/training.hpp"

namespace mihst {

using nlohmann::ordered_json;

SelectionThresholds SelectionThresholds::effective() const {
  if (!(scale > 0.0)) throw ConfigError("threshold scale must be > 0");
  SelectionThresholds t = *this;
  for (double* v : {&t.phase0_admissions, &t.phase1_admissions, &t.phase2_admissions, &t.keep_codes,
                    &t.final_codes, &t.low_score_codes})
    *v *= scale;
  t.scale = 1.0;
  return t;
}

ordered_json SelectionThresholds::to_json() const {
  ordered_json j;
  j["phase0_admissions"] = phase0_admissions;
  j["phase1_admissions"] = phase1_admissions;
  j["phase2_admissions"] = phase2_admissions;
  j["keep_codes"] = keep_codes;
  j["final_codes"] = final_codes;
  j["low_score_codes"] = low_score_codes;
  j["phase1_score"] = phase1_score;
  j["phase2_score"] = phase2_score;
  j["top_k"] = top_k;
  j["scale"] = scale;
  j["lambda_ladder"] = lambda_ladder;
  j["decision_threshold"] = decision_threshold;
  return j;
}

SelectionThresholds SelectionThresholds::from_json(const ordered_json& j) {
  SelectionThresholds t;
  t.phase0_admissions = j.at("phase0_admissions").get<double>();
  t.phase1_admissions = j.at("phase1_admissions").get<double>();
  t.phase2_admissions = j.at("phase2_admissions").get<double>();
  t.keep_codes = j.at("keep_codes").get<double>();
  t.final_codes = j.at("final_codes").get<double>();
  t.low_score_codes = j.at("low_score_codes").get<double>();
  t.phase1_score = j.at("phase1_score").get<double>();
  t.phase2_score = j.at("phase2_score").get<double>();
  t.top_k = j.at("top_k").get<std::size_t>();
  t.scale = j.at("scale").get<double>();
  t.lambda_ladder = j.at("lambda_ladder").get<std::vector<double>>();
  t.decision_threshold = j.at("decision_threshold").get<double>();
  return t;
}

namespace {

ordered_json fit_to_json(const CodeFit& f) {
  ordered_json j;
  j["score"] = f.score;
  j["lambda"] = f.lambda;
  j["top_variables"] = f.top_variables;
  j["important"] = f.important;
  return j;
}

CodeFit fit_from_json(const ordered_json& j) {
  CodeFit f;
  f.score = j.at("score").get<double>();
  f.lambda = j.at("lambda").get<double>();
  f.top_variables = j.at("top_variables").get<std::vector<std::string>>();
  f.important = j.at("important").get<std::vector<std::string>>();
  return f;
}

std::vector<std::string> features_above(const std::map<std::string, std::size_t>& counts,
                                        double threshold) {
  std::vector<std::string> out;
  for (const auto& [f, c] : counts)
    if (static_cast<double>(c) > threshold) out.push_back(f);
  return out;
}

std::vector<std::string> at_least(const std::map<std::string, std::size_t>& imp, double n) {
  std::vector<std::string> out;
  for (const auto& [f, c] : imp)
    if (c > 0 && static_cast<double>(c) >= n) out.push_back(f);
  return out;
}

// Fits the listed codes concurrently; results come back in list order.
std::vector<CodeFit> fit_all(const CodeFitter& fitter, const std::vector<std::size_t>& codes,
                             const std::vector<std::string>& candidates) {
  std::vector<CodeFit> out(codes.size());
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(codes.size(), std::thread::hardware_concurrency()));
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w)
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < codes.size(); i += workers) out[i] = fitter(codes[i], candidates);
    }));
  for (auto& j : jobs) j.get();
  return out;
}

}  // namespace

std::map<std::string, std::size_t> importance_counts(std::span<const CodeState> codes) {
  std::map<std::string, std::size_t> imp;
  for (const auto& c : codes) {
    std::set<std::string> seen(c.fit.important.begin(), c.fit.important.end());
    for (const auto& f : seen) ++imp[f];
  }
  return imp;
}

FeatureSelectionReport run_selection(const std::vector<std::string>& codes,
                                     const std::map<std::string, std::size_t>& admission_counts,
                                     const CodeFitter& fitter, const SelectionThresholds& th_in) {
  const SelectionThresholds th = th_in.effective();
  FeatureSelectionReport rep;
  rep.thresholds = th;
  rep.admission_counts = admission_counts;

  std::vector<CodeState> states(codes.size());
  const double adm[3] = {th.phase0_admissions, th.phase1_admissions, th.phase2_admissions};
  for (int phase = 0; phase < 3; ++phase) {
    PhaseRecord rec;
    rec.phase = phase;
    rec.admission_threshold = adm[phase];
    rec.candidates = features_above(admission_counts, adm[phase]);

    std::vector<std::size_t> todo;
    if (phase == 0) {
      if (rec.candidates.empty())
        throw Error("no lab feature is measured in more than " + std::to_string(adm[0]) +
                    " admissions; lower the admission thresholds");
      for (std::size_t i = 0; i < codes.size(); ++i) todo.push_back(i);
    } else {
      const double cut = phase == 1 ? th.phase1_score : th.phase2_score;
      for (std::size_t i = 0; i < codes.size(); ++i)
        if (states[i].fit.score < cut) todo.push_back(i);
    }

    const auto fits = fit_all(fitter, todo, rec.candidates);
    for (std::size_t t = 0; t < todo.size(); ++t) {
      const std::size_t i = todo[t];
      rec.retrained.push_back(codes[i]);
      if (phase == 0 || fits[t].score > states[i].fit.score) {
        states[i] = {codes[i], fits[t], phase};
        rec.updated.push_back(codes[i]);
      }
    }
    rec.codes = states;
    rec.importance = importance_counts(states);
    if (phase == 0) rec.selected = at_least(rec.importance, th.keep_codes);
    rep.phases.push_back(std::move(rec));
  }

  for (const auto& c : rep.phases[0].codes)
    if (c.fit.score < th.phase1_score) rep.low_score_codes.push_back(c.code);
  rep.final_features = recompute_final_features(rep);
  return rep;
}

std::vector<std::string> recompute_final_features(const FeatureSelectionReport& rep) {
  if (rep.phases.empty()) throw Error("selection report has no phases");
  const auto& last = rep.phases.back().codes;
  const std::set<std::string> low(rep.low_score_codes.begin(), rep.low_score_codes.end());
  std::vector<CodeState> low_states;
  for (const auto& c : last)
    if (low.count(c.code)) low_states.push_back(c);

  std::set<std::string> out;
  for (const auto& f : at_least(importance_counts(last), rep.thresholds.final_codes)) out.insert(f);
  for (const auto& f : at_least(importance_counts(low_states), rep.thresholds.low_score_codes))
    out.insert(f);
  return {out.begin(), out.end()};
}

ordered_json FeatureSelectionReport::to_json() const {
  ordered_json j;
  j["thresholds"] = thresholds.to_json();
  j["admission_counts"] = admission_counts;
  ordered_json phs = ordered_json::array();
  for (const auto& p : phases) {
    ordered_json pj;
    pj["phase"] = p.phase;
    pj["admission_threshold"] = p.admission_threshold;
    pj["candidates"] = p.candidates;
    pj["retrained"] = p.retrained;
    pj["updated"] = p.updated;
    ordered_json cj = ordered_json::array();
    for (const auto& c : p.codes) {
      ordered_json e = fit_to_json(c.fit);
      e["code"] = c.code;
      e["phase"] = c.phase;
      cj.push_back(std::move(e));
    }
    pj["codes"] = std::move(cj);
    pj["importance"] = p.importance;
    pj["selected"] = p.selected;
    phs.push_back(std::move(pj));
  }
  j["phases"] = std::move(phs);
  j["low_score_codes"] = low_score_codes;
  j["final_features"] = final_features;
  return j;
}

FeatureSelectionReport FeatureSelectionReport::from_json(const ordered_json& j) {
  FeatureSelectionReport r;
  r.thresholds = SelectionThresholds::from_json(j.at("thresholds"));
  r.admission_counts = j.at("admission_counts").get<std::map<std::string, std::size_t>>();
  for (const auto& pj : j.at("phases")) {
    PhaseRecord p;
    p.phase = pj.at("phase").get<int>();
    p.admission_threshold = pj.at("admission_threshold").get<double>();
    p.candidates = pj.at("candidates").get<std::vector<std::string>>();
    p.retrained = pj.at("retrained").get<std::vector<std::string>>();
    p.updated = pj.at("updated").get<std::vector<std::string>>();
    for (const auto& e : pj.at("codes"))
      p.codes.push_back({e.at("code").get<std::string>(), fit_from_json(e), e.at("phase").get<int>()});
    p.importance = pj.at("importance").get<std::map<std::string, std::size_t>>();
    p.selected = pj.at("selected").get<std::vector<std::string>>();
    r.phases.push_back(std::move(p));
  }
  r.low_score_codes = j.at("low_score_codes").get<std::vector<std::string>>();
  r.final_features = j.at("final_features").get<std::vector<std::string>>();
  return r;
}

void FeatureSelectionReport::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json().dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

FeatureSelectionReport FeatureSelectionReport::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return from_json(ordered_json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::map<std::string, std::size_t> count_admissions(std::span<const AdmissionRecord> adms) {
  std::map<std::string, std::size_t> counts;
  std::set<std::string> seen;
  for (const auto& a : adms) {
    seen.clear();
    for (const auto& ev : a.events)
      if (ev.is_lab()) seen.insert(ev.feature);
    for (const auto& f : seen) ++counts[f];
  }
  return counts;
}

FeatureSelectionReport select_features(std::span<const AdmissionRecord> train,
                                       std::span<const AdmissionRecord> dev,
                                       const LabelVocabulary& labels,
                                       const SelectionThresholds& th_in) {
  const SelectionThresholds th = th_in.effective();
  if (th.lambda_ladder.empty()) throw ConfigError("lambda ladder is empty");
  if (th.top_k == 0) throw ConfigError("top_k must be >= 1");
  if (train.empty() || dev.empty()) throw Error("feature selection needs train and dev admissions");

  const auto counts = count_admissions(train);
  const double floor = std::min({th.phase0_admissions, th.phase1_admissions, th.phase2_admissions});
  const auto universe = features_above(counts, floor);

  LabDesignMatrix xtr = summarize_labs(train, universe);
  LabDesignMatrix xdv = summarize_labs(dev, universe);
  const DesignTransform tf = fit_design_transform(xtr);
  apply_design_transform(tf, xtr);
  apply_design_transform(tf, xdv);

  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t f = 0; f < universe.size(); ++f) slot[universe[f]] = f;

  const std::size_t L = labels.size();
  std::vector<std::vector<std::uint8_t>> ytr(L, std::vector<std::uint8_t>(train.size()));
  std::vector<std::vector<std::uint8_t>> ydv(L, std::vector<std::uint8_t>(dev.size()));
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto mh = labels.multi_hot(train[i].labels);
    for (std::size_t l = 0; l < L; ++l) ytr[l][i] = mh[l];
  }
  for (std::size_t i = 0; i < dev.size(); ++i) {
    const auto mh = labels.multi_hot(dev[i].labels);
    for (std::size_t l = 0; l < L; ++l) ydv[l][i] = mh[l];
  }

  CodeFitter fitter = [&](std::size_t code, const std::vector<std::string>& cands) {
    std::vector<std::size_t> cols;
    for (const auto& f : cands) {
      const std::size_t s = slot.at(f);
      cols.push_back(2 * s);
      cols.push_back(2 * s + 1);
    }
    const DenseMatrix a = xtr.values.select_columns(cols);
    const DenseMatrix b = xdv.values.select_columns(cols);

    CodeFit best;
    best.score = -1.0;
    L1LogRegModel best_model;
    for (double lam : th.lambda_ladder) {
      L1LogRegModel m = fit_l1_logreg(a, ytr[code], lam);
      std::size_t tp = 0, fp = 0, fn = 0;
      for (std::size_t r = 0; r < b.rows; ++r) {
        const bool p = m.predict_proba(b.row(r)) >= th.decision_threshold;
        const bool g = ydv[code][r] != 0;
        tp += p && g;
        fp += p && !g;
        fn += !p && g;
      }
      const double score = f1_score(tp, fp, fn);
      // ties go to the stronger penalty
      if (score > best.score || (score == best.score && lam > best.lambda)) {
        best.score = score;
        best.lambda = lam;
        best_model = std::move(m);
      }
    }
    std::set<std::string> seen;
    for (std::size_t id : top_variables(best_model, th.top_k)) {
      const DesignColumn& c = xtr.columns[cols[id]];
      best.top_variables.push_back(c.label());
      if (seen.insert(c.feature).second) best.important.push_back(c.feature);
    }
    return best;
  };

  return run_selection(labels.codes(), counts, fitter, th);
}

void write_feature_list(const std::filesystem::path& path, std::span<const std::string> features) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& f : features) out << f << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::string> read_feature_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace mihst
