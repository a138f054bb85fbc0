#pragma once

// Admission records and their JSONL / label-vocabulary file formats.
//
// JSONL schema, one admission per line:
//   {"admission_id": str, "labels": [str],
//    "events": [{"kind": "note", "time": float, "tokens": [int]}
//             | {"kind": "lab", "time": float, "feature": str,
//                "value": float, "unit": str}]}
// Times are hours since admission (>= 0).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mihst {

enum class EventKind { note, lab };

struct ClinicalEvent {
  EventKind kind = EventKind::note;
  double time = 0.0;
  std::vector<std::size_t> tokens;  // note chunk token ids
  std::string feature;              // lab feature name
  double value = 0.0;
  std::string unit;

  static ClinicalEvent note(double time, std::vector<std::size_t> tokens);
  static ClinicalEvent lab(double time, std::string feature, double value,
                           std::string unit = {});

  bool is_note() const noexcept { return kind == EventKind::note; }
  bool is_lab() const noexcept { return kind == EventKind::lab; }
};

struct AdmissionRecord {
  std::string admission_id;
  std::vector<std::string> labels;  // sorted, unique
  std::vector<ClinicalEvent> events;  // non-decreasing in time
};

// Stable-sorts events by time and normalizes the label list. Throws on a
// negative or non-finite time, an empty note chunk, or a non-finite value.
void canonicalize(AdmissionRecord& adm);

AdmissionRecord parse_admission(std::string_view json_line, std::size_t line_no = 0);
std::string format_admission(const AdmissionRecord& adm);

std::vector<AdmissionRecord> read_admissions(std::istream& in);
std::vector<AdmissionRecord> load_admissions(const std::filesystem::path& path);
void write_admissions(std::ostream& out, std::span<const AdmissionRecord> adms);
void save_admissions(const std::filesystem::path& path,
                     std::span<const AdmissionRecord> adms);

// Ordered ICD code list; position in the list is the label index.
class LabelVocabulary {
 public:
  LabelVocabulary() = default;
  explicit LabelVocabulary(std::vector<std::string> codes);

  static LabelVocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const noexcept { return codes_.size(); }
  const std::vector<std::string>& codes() const noexcept { return codes_; }
  const std::string& code(std::size_t i) const { return codes_.at(i); }
  bool contains(std::string_view code) const;
  std::size_t index(std::string_view code) const;

  // 0/1 indicator per label index. Throws on a code outside the vocabulary.
  std::vector<std::uint8_t> multi_hot(std::span<const std::string> labels) const;

 private:
  std::vector<std::string> codes_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace mihst
