#include "mihst/admission.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"

#include "mihst/error.hpp"

namespace mihst {

using nlohmann::ordered_json;

ClinicalEvent ClinicalEvent::note(double time, std::vector<std::size_t> tokens) {
  ClinicalEvent e;
  e.kind = EventKind::note;
  e.time = time;
  e.tokens = std::move(tokens);
  return e;
}

ClinicalEvent ClinicalEvent::lab(double time, std::string feature, double value,
                                 std::string unit) {
  ClinicalEvent e;
  e.kind = EventKind::lab;
  e.time = time;
  e.feature = std::move(feature);
  e.value = value;
  e.unit = std::move(unit);
  return e;
}

void canonicalize(AdmissionRecord& adm) {
  for (const auto& e : adm.events) {
    if (!std::isfinite(e.time)) throw Error("event time is not finite");
    if (e.time < 0.0) throw Error("negative event time " + std::to_string(e.time));
    if (e.is_note() && e.tokens.empty()) throw Error("note chunk has no tokens");
    if (e.is_lab() && !std::isfinite(e.value)) {
      throw Error("lab value for '" + e.feature + "' is not finite");
    }
  }
  std::stable_sort(adm.events.begin(), adm.events.end(),
                   [](const ClinicalEvent& a, const ClinicalEvent& b) { return a.time < b.time; });
  std::sort(adm.labels.begin(), adm.labels.end());
  adm.labels.erase(std::unique(adm.labels.begin(), adm.labels.end()), adm.labels.end());
}

AdmissionRecord parse_admission(std::string_view json_line, std::size_t line_no) {
  AdmissionRecord adm;
  try {
    const auto j = ordered_json::parse(json_line);
    adm.admission_id = j.at("admission_id").get<std::string>();
    adm.labels = j.at("labels").get<std::vector<std::string>>();
    for (const auto& ev : j.at("events")) {
      const auto kind = ev.at("kind").get<std::string>();
      const double time = ev.at("time").get<double>();
      if (kind == "note") {
        adm.events.push_back(
            ClinicalEvent::note(time, ev.at("tokens").get<std::vector<std::size_t>>()));
      } else if (kind == "lab") {
        adm.events.push_back(ClinicalEvent::lab(time, ev.at("feature").get<std::string>(),
                                                ev.at("value").get<double>(),
                                                ev.value("unit", std::string{})));
      } else {
        throw ParseError("unknown event kind '" + kind + "'", line_no);
      }
    }
    canonicalize(adm);
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(e.what(), line_no);
  }
  return adm;
}

std::string format_admission(const AdmissionRecord& adm) {
  ordered_json j;
  j["admission_id"] = adm.admission_id;
  j["labels"] = adm.labels;
  auto events = ordered_json::array();
  for (const auto& e : adm.events) {
    ordered_json ev;
    if (e.is_note()) {
      ev["kind"] = "note";
      ev["time"] = e.time;
      ev["tokens"] = e.tokens;
    } else {
      ev["kind"] = "lab";
      ev["time"] = e.time;
      ev["feature"] = e.feature;
      ev["value"] = e.value;
      ev["unit"] = e.unit;
    }
    events.push_back(std::move(ev));
  }
  j["events"] = std::move(events);
  return j.dump();
}

std::vector<AdmissionRecord> read_admissions(std::istream& in) {
  std::vector<AdmissionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_admission(line, line_no));
  }
  return out;
}

std::vector<AdmissionRecord> load_admissions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open admissions file " + path.string());
  return read_admissions(in);
}

void write_admissions(std::ostream& out, std::span<const AdmissionRecord> adms) {
  for (const auto& a : adms) out << format_admission(a) << '\n';
}

void save_admissions(const std::filesystem::path& path,
                     std::span<const AdmissionRecord> adms) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write admissions file " + path.string());
  write_admissions(out, adms);
  if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------

LabelVocabulary::LabelVocabulary(std::vector<std::string> codes) : codes_(std::move(codes)) {
  for (std::size_t i = 0; i < codes_.size(); ++i) {
    if (!index_.emplace(codes_[i], i).second) {
      throw Error("duplicate label code '" + codes_[i] + "'");
    }
  }
}

LabelVocabulary LabelVocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open label vocabulary " + path.string());
  std::vector<std::string> codes;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) codes.push_back(line);
  }
  return LabelVocabulary(std::move(codes));
}

void LabelVocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write label vocabulary " + path.string());
  for (const auto& c : codes_) out << c << '\n';
}

bool LabelVocabulary::contains(std::string_view code) const {
  return index_.count(std::string(code)) > 0;
}

std::size_t LabelVocabulary::index(std::string_view code) const {
  auto it = index_.find(std::string(code));
  if (it == index_.end()) throw Error("label '" + std::string(code) + "' not in vocabulary");
  return it->second;
}

std::vector<std::uint8_t> LabelVocabulary::multi_hot(std::span<const std::string> labels) const {
  std::vector<std::uint8_t> y(codes_.size(), 0);
  for (const auto& l : labels) y[index(l)] = 1;
  return y;
}

}  // namespace mihst
