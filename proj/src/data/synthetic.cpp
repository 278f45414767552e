#include "cognet/ehr_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

namespace cognet {

namespace {

std::string make_code(char prefix, int id) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%c%03d", prefix, id);
  return buf;
}

// Partial Fisher-Yates: k distinct ids from [0, n), returned sorted.
std::vector<int> sample_distinct(int n, int k, std::mt19937_64& rng) {
  std::vector<int> pool(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

std::vector<std::vector<int>> synthetic_rule_table(int num_diagnoses, int num_meds) {
  std::vector<std::vector<int>> rules(static_cast<std::size_t>(num_diagnoses));
  for (int d = 0; d < num_diagnoses; ++d) {
    auto& r = rules[static_cast<std::size_t>(d)];
    r.push_back((7 * d + 3) % num_meds);
    if (d % 3 == 0) {
      const int second = (13 * d + 5) % num_meds;
      if (second != r.front()) r.push_back(second);
    }
  }
  return rules;
}

std::vector<int> synthetic_visit_meds(const std::vector<int>& carried,
                                      const std::vector<int>& diagnoses,
                                      const std::vector<std::vector<int>>& rules) {
  std::vector<int> meds;
  auto push = [&meds](int m) {
    if (static_cast<int>(meds.size()) >= kSyntheticMaxMeds) return;
    if (std::find(meds.begin(), meds.end(), m) == meds.end()) meds.push_back(m);
  };
  for (int m : carried) push(m);
  for (int d : diagnoses) {
    for (int m : rules.at(static_cast<std::size_t>(d))) push(m);
  }
  std::sort(meds.begin(), meds.end());
  return meds;
}

DatasetBundle generate_synthetic_cohort(int n_patients, double persistence, std::uint64_t seed,
                                        VocabSizes sizes) {
  if (n_patients < 1) throw ValidationError("n_patients must be >= 1");
  if (!std::isfinite(persistence) || persistence < 0.0 || persistence > 1.0) {
    throw ValidationError("persistence must lie in [0, 1]");
  }
  if (sizes.diagnoses < 4 || sizes.procedures < 4 || sizes.medications < 4) {
    throw ValidationError("vocabulary sizes must be >= 4");
  }

  DatasetBundle bundle;
  for (int i = 0; i < sizes.diagnoses; ++i) bundle.diagnoses.add(make_code('D', i));
  for (int i = 0; i < sizes.procedures; ++i) bundle.procedures.add(make_code('P', i));
  for (int i = 0; i < sizes.medications; ++i) bundle.medications.add(make_code('M', i));

  const auto rules = synthetic_rule_table(sizes.diagnoses, sizes.medications);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(persistence);
  std::uniform_int_distribution<int> visit_count(kSyntheticMinVisits, kSyntheticMaxVisits);
  std::uniform_int_distribution<int> diag_count(1, std::min(kSyntheticMaxDiagnoses, sizes.diagnoses));
  std::uniform_int_distribution<int> proc_count(0, std::min(kSyntheticMaxProcedures, sizes.procedures));

  bundle.train.reserve(static_cast<std::size_t>(n_patients));
  for (int p = 0; p < n_patients; ++p) {
    PatientRecord patient;
    char id[24];
    std::snprintf(id, sizeof(id), "S%06d", p);
    patient.patient_id = id;
    const int n_visits = visit_count(rng);
    for (int t = 0; t < n_visits; ++t) {
      Visit v;
      v.diagnoses = sample_distinct(sizes.diagnoses, diag_count(rng), rng);
      v.procedures = sample_distinct(sizes.procedures, proc_count(rng), rng);
      std::vector<int> carried;
      if (t > 0) {
        for (int m : patient.visits.back().medications) {
          if (keep(rng)) carried.push_back(m);
        }
      }
      v.medications = synthetic_visit_meds(carried, v.diagnoses, rules);
      patient.visits.push_back(std::move(v));
    }
    bundle.train.push_back(std::move(patient));
  }
  bundle.med_frequency = count_med_frequency(bundle.train, bundle.num_medications());
  return bundle;
}

std::vector<std::pair<std::string, std::string>> synthetic_ddi_pairs(
    const CodeVocabulary& meds, int n_pairs, std::uint64_t seed) {
  const int n = meds.size();
  const int total = n * (n - 1) / 2;
  n_pairs = std::clamp(n_pairs, 0, total);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::set<std::pair<int, int>> chosen;
  while (static_cast<int>(chosen.size()) < n_pairs) {
    int a = pick(rng);
    int b = pick(rng);
    if (a == b) continue;
    chosen.emplace(std::min(a, b), std::max(a, b));
  }
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(chosen.size());
  for (auto [a, b] : chosen) out.emplace_back(meds.code(a), meds.code(b));
  return out;
}

}  // namespace cognet
