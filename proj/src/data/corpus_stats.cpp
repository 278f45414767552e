#include "cognet/ehr_data.hpp"

#include <algorithm>
#include <set>

namespace cognet {

std::optional<VisitOverlap> visit_overlap(const std::vector<int>& current,
                                          const std::vector<int>& history) {
  if (history.empty() || current.empty()) return std::nullopt;
  const std::set<int> cur(current.begin(), current.end());
  const std::set<int> hist(history.begin(), history.end());
  std::size_t inter = 0;
  for (int m : cur) inter += hist.count(m);
  const std::size_t uni = cur.size() + hist.size() - inter;
  return VisitOverlap{static_cast<double>(inter) / static_cast<double>(cur.size()),
                      static_cast<double>(inter) / static_cast<double>(uni)};
}

CorpusStatistics corpus_statistics(const DatasetBundle& bundle) {
  const auto patients = bundle.all_patients();
  if (patients.empty()) throw ValidationError("corpus statistics need at least one patient");

  CorpusStatistics s;
  s.num_diagnosis_codes = bundle.num_diagnoses();
  s.num_procedure_codes = bundle.num_procedures();
  s.num_medication_codes = bundle.num_medications();
  std::int64_t diag_total = 0, proc_total = 0, med_total = 0;
  for (const PatientRecord* p : patients) {
    ++s.num_patients;
    s.max_visits = std::max(s.max_visits, static_cast<int>(p->visits.size()));
    std::vector<int> history;
    for (const Visit& v : p->visits) {
      ++s.num_visits;
      diag_total += static_cast<std::int64_t>(v.diagnoses.size());
      proc_total += static_cast<std::int64_t>(v.procedures.size());
      med_total += static_cast<std::int64_t>(v.medications.size());
      s.max_diagnoses = std::max(s.max_diagnoses, static_cast<int>(v.diagnoses.size()));
      s.max_procedures = std::max(s.max_procedures, static_cast<int>(v.procedures.size()));
      s.max_medications = std::max(s.max_medications, static_cast<int>(v.medications.size()));
      if (auto o = visit_overlap(v.medications, history)) {
        s.repeated_proportion.push_back(o->repeated_proportion);
        s.history_jaccard.push_back(o->jaccard);
      }
      history.insert(history.end(), v.medications.begin(), v.medications.end());
    }
  }
  const auto visits = static_cast<double>(s.num_visits);
  s.avg_visits = visits / static_cast<double>(s.num_patients);
  s.avg_diagnoses = static_cast<double>(diag_total) / visits;
  s.avg_procedures = static_cast<double>(proc_total) / visits;
  s.avg_medications = static_cast<double>(med_total) / visits;
  return s;
}

std::vector<std::int64_t> histogram(const std::vector<double>& values, int bins) {
  if (bins < 1) throw ValidationError("bin count must be >= 1");
  std::vector<std::int64_t> counts(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    int b = static_cast<int>(v * bins);
    b = std::clamp(b, 0, bins - 1);
    ++counts[static_cast<std::size_t>(b)];
  }
  return counts;
}

}  // namespace cognet
