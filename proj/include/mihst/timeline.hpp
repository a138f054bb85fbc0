#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mihst/admission.hpp"

namespace mihst {

enum class PositionKind { note, lab_group };

// One position of the fused event sequence: a single note chunk, or all lab
// events sharing one timestamp.
struct TimelinePosition {
  PositionKind kind = PositionKind::note;
  double time = 0.0;
  std::vector<std::size_t> members;  // indices into the input list(s)
};

// Orders note chunks and lab groups by time. Labs with exactly equal times
// form one group. On equal times notes come before the lab group; notes
// sharing a time keep their input order. `members` index into note_times
// for note positions and into lab_times for lab groups.
std::vector<TimelinePosition> merge_timeline(std::span<const double> note_times,
                                             std::span<const double> lab_times);

// Same, with `members` indexing adm.events.
std::vector<TimelinePosition> merge_timeline(const AdmissionRecord& adm);

}  // namespace mihst
