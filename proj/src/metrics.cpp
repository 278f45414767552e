#include "cognet/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

namespace cognet {

namespace {

std::size_t intersection_size(const std::vector<int>& a, const std::vector<int>& b) {
  const std::set<int> sa(a.begin(), a.end());
  std::size_t n = 0;
  for (int x : std::set<int>(b.begin(), b.end())) n += sa.count(x);
  return n;
}

template <class VisitMetric>
double patient_average(std::span<const PatientPredictions> patients, VisitMetric&& metric) {
  if (patients.empty()) return 0.0;
  double total = 0.0;
  for (const auto& visits : patients) {
    if (visits.empty()) throw std::invalid_argument("patient without visits in metric input");
    double s = 0.0;
    for (const auto& v : visits) s += metric(v);
    total += s / static_cast<double>(visits.size());
  }
  return total / static_cast<double>(patients.size());
}

}  // namespace

double visit_jaccard(const std::vector<int>& truth, const std::vector<int>& predicted) {
  const std::size_t inter = intersection_size(truth, predicted);
  const std::size_t uni = std::set<int>(truth.begin(), truth.end()).size() +
                          std::set<int>(predicted.begin(), predicted.end()).size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double visit_f1(const std::vector<int>& truth, const std::vector<int>& predicted) {
  const auto inter = static_cast<double>(intersection_size(truth, predicted));
  const auto n_pred = static_cast<double>(std::set<int>(predicted.begin(), predicted.end()).size());
  const auto n_true = static_cast<double>(std::set<int>(truth.begin(), truth.end()).size());
  const double precision = n_pred == 0 ? 0.0 : inter / n_pred;
  const double recall = n_true == 0 ? 0.0 : inter / n_true;
  return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

double visit_prauc(const VisitPrediction& visit, int num_meds) {
  if (visit.step_probs.empty()) throw std::invalid_argument("PRAUC needs per-step probabilities");
  const std::set<int> truth(visit.truth.begin(), visit.truth.end());
  if (truth.empty()) return 0.0;

  std::vector<double> score(static_cast<std::size_t>(num_meds), 0.0);
  for (const auto& p : visit.step_probs) {
    if (p.size() < num_meds) throw std::invalid_argument("step vector narrower than |M|");
    for (int m = 0; m < num_meds; ++m) score[static_cast<std::size_t>(m)] += p(m);
  }
  for (double& s : score) s /= static_cast<double>(visit.step_probs.size());
  for (std::size_t k = 0; k < visit.recommended.size() && k < visit.step_probs.size(); ++k) {
    const int m = visit.recommended[k];
    score[static_cast<std::size_t>(m)] = visit.step_probs[k](m);
  }

  std::vector<int> order(static_cast<std::size_t>(num_meds));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)];
  });

  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (!truth.count(order[k])) continue;
    ++hits;
    const double precision = static_cast<double>(hits) / static_cast<double>(k + 1);
    const double recall = static_cast<double>(hits) / static_cast<double>(truth.size());
    ap += precision * (recall - prev_recall);
    prev_recall = recall;
  }
  return ap;
}

double visit_ddi_rate(const std::vector<int>& predicted, const Matrix& ddi) {
  const std::set<int> unique(predicted.begin(), predicted.end());
  const std::vector<int> meds(unique.begin(), unique.end());
  if (meds.size() < 2) return 0.0;
  std::size_t pairs = 0, hits = 0;
  for (std::size_t j = 0; j < meds.size(); ++j) {
    for (std::size_t k = j + 1; k < meds.size(); ++k) {
      ++pairs;
      if (ddi(meds[j], meds[k]) == 1.0) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(pairs);
}

double jaccard(std::span<const PatientPredictions> patients) {
  return patient_average(patients, [](const VisitPrediction& v) {
    return visit_jaccard(v.truth, v.recommended);
  });
}

double f1(std::span<const PatientPredictions> patients) {
  return patient_average(patients,
                         [](const VisitPrediction& v) { return visit_f1(v.truth, v.recommended); });
}

double prauc(std::span<const PatientPredictions> patients, int num_meds) {
  return patient_average(patients,
                         [num_meds](const VisitPrediction& v) { return visit_prauc(v, num_meds); });
}

double ddi_rate(std::span<const PatientPredictions> patients, const Matrix& ddi) {
  return patient_average(patients,
                         [&ddi](const VisitPrediction& v) { return visit_ddi_rate(v.recommended, ddi); });
}

double avg_drug_count(std::span<const PatientPredictions> patients) {
  return patient_average(patients, [](const VisitPrediction& v) {
    return static_cast<double>(std::set<int>(v.recommended.begin(), v.recommended.end()).size());
  });
}

MetricSummary summarize(std::span<const PatientPredictions> patients, const Matrix& ddi,
                        int num_meds) {
  return {jaccard(patients), f1(patients), prauc(patients, num_meds), ddi_rate(patients, ddi),
          avg_drug_count(patients)};
}

MetricStat mean_std(std::span<const double> values) {
  if (values.empty()) return {};
  // Welford updates keep identical values at exactly zero spread.
  double mean = 0.0, m2 = 0.0, n = 0.0;
  for (double v : values) {
    n += 1.0;
    const double delta = v - mean;
    mean += delta / n;
    m2 += delta * (v - mean);
  }
  return {mean, std::sqrt(m2 / n)};
}

BootstrapReport bootstrap(std::span<const PatientPredictions> patients, const Matrix& ddi,
                          int num_meds, int rounds, double frac, std::uint64_t seed) {
  if (patients.empty()) throw ValidationError("bootstrap needs a non-empty test split");
  if (rounds < 1) throw ValidationError("bootstrap rounds must be >= 1");
  if (!(frac > 0.0 && frac <= 1.0)) throw ValidationError("bootstrap fraction must lie in (0, 1]");

  BootstrapReport report;
  report.rounds = rounds;
  report.frac = frac;
  const auto n = patients.size();
  const auto k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(frac * static_cast<double>(n) + 1e-9)));
  report.sample_size = static_cast<int>(k);

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  std::vector<PatientPredictions> sample;
  for (int r = 0; r < rounds; ++r) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    // Fixed summation order within a round regardless of draw order.
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    sample.clear();
    for (std::size_t i = 0; i < k; ++i) sample.push_back(patients[order[i]]);
    report.per_round.push_back(summarize(sample, ddi, num_meds));
  }

  auto stat = [&](double MetricSummary::*field) {
    std::vector<double> v;
    for (const auto& m : report.per_round) v.push_back(m.*field);
    return mean_std(v);
  };
  report.jaccard = stat(&MetricSummary::jaccard);
  report.f1 = stat(&MetricSummary::f1);
  report.prauc = stat(&MetricSummary::prauc);
  report.ddi = stat(&MetricSummary::ddi);
  report.avg_drugs = stat(&MetricSummary::avg_drugs);
  return report;
}

std::string BootstrapReport::to_json() const {
  auto entry = [](const MetricStat& s) { return nlohmann::json{{"mean", s.mean}, {"std", s.std}}; };
  const nlohmann::json j = {
      {"jaccard", entry(jaccard)},
      {"f1", entry(f1)},
      {"prauc", entry(prauc)},
      {"ddi", entry(ddi)},
      {"avg_drugs", entry(avg_drugs)},
      {"protocol", {{"rounds", rounds}, {"frac", frac}, {"sample_size", sample_size}}},
  };
  return j.dump(2);
}

}  // namespace cognet
