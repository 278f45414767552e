#include "cognet/ehr_data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

namespace cognet {

DatasetBundle split_dataset(const DatasetBundle& bundle, double train_ratio, double val_ratio,
                            double test_ratio, std::uint64_t seed) {
  for (double r : {train_ratio, val_ratio, test_ratio}) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ValidationError("split ratios must be positive");
  }
  const double total = train_ratio + val_ratio + test_ratio;

  std::vector<const PatientRecord*> patients = bundle.all_patients();
  std::mt19937_64 rng(seed);
  std::shuffle(patients.begin(), patients.end(), rng);

  const auto n = static_cast<double>(patients.size());
  // The epsilon keeps exact products like 3 * (1/3) from flooring down.
  const auto n_train = static_cast<std::size_t>(std::floor(n * train_ratio / total + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(n * val_ratio / total + 1e-9));

  DatasetBundle out;
  out.diagnoses = bundle.diagnoses;
  out.procedures = bundle.procedures;
  out.medications = bundle.medications;
  for (std::size_t i = 0; i < patients.size(); ++i) {
    auto& dest = i < n_train ? out.train : (i < n_train + n_val ? out.validation : out.test);
    dest.push_back(*patients[i]);
  }
  out.med_frequency = count_med_frequency(out.train, out.num_medications());
  return out;
}

LabelOrder parse_label_order(std::string_view name) {
  if (name == "rare_first") return LabelOrder::rare_first;
  if (name == "frequent_first") return LabelOrder::frequent_first;
  if (name == "early_first") return LabelOrder::early_first;
  if (name == "late_first") return LabelOrder::late_first;
  throw ValidationError("unknown label order '" + std::string(name) + "'");
}

std::string_view to_string(LabelOrder order) {
  switch (order) {
    case LabelOrder::rare_first: return "rare_first";
    case LabelOrder::frequent_first: return "frequent_first";
    case LabelOrder::early_first: return "early_first";
    case LabelOrder::late_first: return "late_first";
  }
  return "unknown";
}

namespace {

void order_patient(PatientRecord& patient, LabelOrder order,
                   const std::vector<std::int64_t>& freq) {
  std::unordered_map<int, int> first_seen;
  for (int t = 0; t < static_cast<int>(patient.visits.size()); ++t) {
    for (int m : patient.visits[static_cast<std::size_t>(t)].medications) first_seen.try_emplace(m, t);
  }
  auto key = [&](int m) -> std::int64_t {
    switch (order) {
      case LabelOrder::rare_first: return freq.at(static_cast<std::size_t>(m));
      case LabelOrder::frequent_first: return -freq.at(static_cast<std::size_t>(m));
      case LabelOrder::early_first: return first_seen.at(m);
      case LabelOrder::late_first: return -first_seen.at(m);
    }
    return 0;
  };
  for (auto& v : patient.visits) {
    std::sort(v.medications.begin(), v.medications.end(), [&](int a, int b) {
      const auto ka = key(a);
      const auto kb = key(b);
      return ka != kb ? ka < kb : a < b;
    });
  }
}

}  // namespace

DatasetBundle order_medications(const DatasetBundle& bundle, LabelOrder order) {
  if (static_cast<int>(bundle.med_frequency.size()) != bundle.num_medications()) {
    throw ValidationError("med_frequency must be computed on the train split before ordering");
  }
  DatasetBundle out = bundle;
  for (auto* split : {&out.train, &out.validation, &out.test}) {
    for (auto& p : *split) order_patient(p, order, out.med_frequency);
  }
  return out;
}

}  // namespace cognet
