#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mihst/selection.hpp"

namespace testing::toy {

using namespace mihst;

// Hand-worked three-phase example. Scale 0.25 gives admission thresholds
// 1250/500/125 and code-count thresholds 5/2.5/1.25.
struct ToyFitter {
  CodeFit operator()(std::size_t code, const std::vector<std::string>& cands) const {
    const std::size_t phase = cands.size() - 2;
    static const std::vector<std::vector<std::pair<double, std::vector<std::string>>>> table{
        {{80, {"A", "B"}}, {75, {"A"}}, {25, {"B"}}, {15, {"A"}}, {28, {"A", "B"}}, {10, {"A"}}},
        {{0, {}}, {0, {}}, {40, {"C"}}, {12, {"A", "C"}}, {35, {"C", "B"}}, {18, {"C"}}},
        {{0, {}}, {0, {}}, {0, {}}, {22, {"D", "A"}}, {0, {}}, {18, {"D"}}},
    };
    const auto& [score, imp] = table.at(phase).at(code);
    CodeFit f;
    f.score = score;
    f.important = imp;
    for (const auto& v : imp) f.top_variables.push_back(v + ":mean");
    return f;
  }
};

inline const std::map<std::string, std::size_t> kToyCounts{{"A", 2000}, {"B", 1300}, {"C", 900}, {"D", 300}, {"E", 100}};
inline const std::vector<std::string> kToyCodes{"c1", "c2", "c3", "c4", "c5", "c6"};

inline SelectionThresholds toy_thresholds() {
  SelectionThresholds th;
  th.scale = 0.25;
  return th;
}

// Straightforward restatement of the procedure used as a reference.
inline std::vector<std::string> reference_selection(const std::vector<std::string>& codes,
                                             const std::map<std::string, std::size_t>& counts,
                                             const CodeFitter& fit, const SelectionThresholds& th0) {
  const SelectionThresholds th = th0.effective();
  auto cands = [&](double t) {
    std::vector<std::string> out;
    for (const auto& [f, c] : counts)
      if (c > t) out.push_back(f);
    return out;
  };
  std::vector<CodeFit> cur(codes.size());
  const auto c0 = cands(th.phase0_admissions);
  for (std::size_t i = 0; i < codes.size(); ++i) cur[i] = fit(i, c0);
  std::vector<bool> low(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) low[i] = cur[i].score < th.phase1_score;
  const double adm[2] = {th.phase1_admissions, th.phase2_admissions};
  const double cut[2] = {th.phase1_score, th.phase2_score};
  for (int ph = 0; ph < 2; ++ph) {
    const auto c = cands(adm[ph]);
    for (std::size_t i = 0; i < codes.size(); ++i) {
      if (!(cur[i].score < cut[ph])) continue;
      CodeFit f = fit(i, c);
      if (f.score > cur[i].score) cur[i] = f;
    }
  }
  std::set<std::string> out;
  for (const auto& [f, n] : counts) {
    double all = 0, lows = 0;
    for (std::size_t i = 0; i < codes.size(); ++i) {
      const bool has = std::find(cur[i].important.begin(), cur[i].important.end(), f) != cur[i].important.end();
      all += has;
      lows += has && low[i];
    }
    if ((all > 0 && all >= th.final_codes) || (lows > 0 && lows >= th.low_score_codes)) out.insert(f);
  }
  return {out.begin(), out.end()};
}

}  // namespace testing::toy
