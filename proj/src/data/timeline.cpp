#include "mihst/timeline.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace mihst {

std::vector<TimelinePosition> merge_timeline(std::span<const double> note_times,
                                             std::span<const double> lab_times) {
  std::vector<TimelinePosition> out;
  out.reserve(note_times.size() + lab_times.size());
  for (std::size_t i = 0; i < note_times.size(); ++i) {
    out.push_back({PositionKind::note, note_times[i], {i}});
  }
  std::map<double, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < lab_times.size(); ++i) groups[lab_times[i]].push_back(i);
  for (auto& [t, members] : groups) {
    out.push_back({PositionKind::lab_group, t, std::move(members)});
  }
  // Notes were pushed first, so a stable sort on (time, kind) keeps note
  // input order and puts notes ahead of a same-time lab group.
  std::stable_sort(out.begin(), out.end(),
                   [](const TimelinePosition& a, const TimelinePosition& b) {
                     if (a.time != b.time) return a.time < b.time;
                     return a.kind == PositionKind::note && b.kind == PositionKind::lab_group;
                   });
  return out;
}

std::vector<TimelinePosition> merge_timeline(const AdmissionRecord& adm) {
  std::vector<double> note_times, lab_times;
  std::vector<std::size_t> note_idx, lab_idx;
  for (std::size_t i = 0; i < adm.events.size(); ++i) {
    const auto& e = adm.events[i];
    if (e.is_note()) {
      note_times.push_back(e.time);
      note_idx.push_back(i);
    } else {
      lab_times.push_back(e.time);
      lab_idx.push_back(i);
    }
  }
  auto positions = merge_timeline(note_times, lab_times);
  for (auto& p : positions) {
    const auto& map = p.kind == PositionKind::note ? note_idx : lab_idx;
    for (auto& m : p.members) m = map[m];
  }
  return positions;
}

}  // namespace mihst
