#include "cognet/ehr_data.hpp"

#include <algorithm>
#include <set>

namespace cognet {

std::string_view to_string(CodeKind kind) {
  switch (kind) {
    case CodeKind::diagnosis: return "diagnosis";
    case CodeKind::procedure: return "procedure";
    case CodeKind::medication: return "medication";
  }
  return "unknown";
}

int CodeVocabulary::add(std::string_view code) {
  if (auto it = index_.find(std::string(code)); it != index_.end()) return it->second;
  const int id = size();
  codes_.emplace_back(code);
  index_.emplace(codes_.back(), id);
  return id;
}

std::optional<int> CodeVocabulary::find(std::string_view code) const {
  if (auto it = index_.find(std::string(code)); it != index_.end()) return it->second;
  return std::nullopt;
}

int CodeVocabulary::id(std::string_view code) const {
  if (auto found = find(code)) return *found;
  throw ValidationError("unknown " + std::string(to_string(kind_)) + " code '" +
                        std::string(code) + "'");
}

const std::string& CodeVocabulary::code(int id) const {
  if (id < 0 || id >= size()) {
    throw ValidationError(std::string(to_string(kind_)) + " id out of range: " +
                          std::to_string(id));
  }
  return codes_[static_cast<std::size_t>(id)];
}

std::uint64_t CodeVocabulary::hash() const {
  std::uint64_t h = fnv1a(to_string(kind_));
  for (const auto& c : codes_) {
    h = fnv1a(c, h);
    h = fnv1a(std::string_view("\n"), h);
  }
  return h;
}

std::vector<const PatientRecord*> DatasetBundle::all_patients() const {
  std::vector<const PatientRecord*> out;
  out.reserve(train.size() + validation.size() + test.size());
  for (const auto* split : {&train, &validation, &test}) {
    for (const auto& p : *split) out.push_back(&p);
  }
  return out;
}

namespace {

void check_ids(const std::vector<int>& ids, int bound, bool sorted, const std::string& what) {
  for (int id : ids) {
    if (id < 0 || id >= bound) throw ValidationError(what + " id out of range: " + std::to_string(id));
  }
  if (sorted && !std::is_sorted(ids.begin(), ids.end())) {
    throw ValidationError(what + " set is not sorted");
  }
  std::vector<int> copy = ids;
  std::sort(copy.begin(), copy.end());
  if (std::adjacent_find(copy.begin(), copy.end()) != copy.end()) {
    throw ValidationError(what + " set has duplicates");
  }
}

}  // namespace

void validate(const DatasetBundle& bundle) {
  std::set<std::string> seen;
  for (const PatientRecord* p : bundle.all_patients()) {
    if (!seen.insert(p->patient_id).second) {
      throw ValidationError("patient '" + p->patient_id + "' appears more than once");
    }
    if (p->visits.empty()) throw ValidationError("patient '" + p->patient_id + "' has no visits");
    for (const Visit& v : p->visits) {
      if (v.diagnoses.empty()) throw ValidationError("visit without diagnoses in " + p->patient_id);
      if (v.medications.empty()) throw ValidationError("visit without medications in " + p->patient_id);
      check_ids(v.diagnoses, bundle.num_diagnoses(), true, "diagnosis");
      check_ids(v.procedures, bundle.num_procedures(), true, "procedure");
      check_ids(v.medications, bundle.num_medications(), false, "medication");
    }
  }
  if (!bundle.med_frequency.empty() &&
      static_cast<int>(bundle.med_frequency.size()) != bundle.num_medications()) {
    throw ValidationError("med_frequency size does not match the medication vocabulary");
  }
}

std::vector<std::int64_t> count_med_frequency(const std::vector<PatientRecord>& patients,
                                              int num_meds) {
  std::vector<std::int64_t> freq(static_cast<std::size_t>(num_meds), 0);
  for (const auto& p : patients) {
    for (const auto& v : p.visits) {
      for (int m : v.medications) ++freq.at(static_cast<std::size_t>(m));
    }
  }
  return freq;
}

}  // namespace cognet
