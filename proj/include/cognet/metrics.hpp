#pragma once

#include "cognet/common.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cognet {

struct VisitPrediction {
  std::vector<int> recommended;         // clinical ids in emission order
  std::vector<RowVector> step_probs;    // one distribution per decode step, START excluded
  std::vector<int> truth;               // ground-truth medication set
};

using PatientPredictions = std::vector<VisitPrediction>;

double visit_jaccard(const std::vector<int>& truth, const std::vector<int>& predicted);
double visit_f1(const std::vector<int>& truth, const std::vector<int>& predicted);
// Average precision over the |M| clinical medications. A recommended
// medication scores its probability at the step that emitted it; every other
// medication scores its mean probability over all steps. Ties rank by
// ascending id. Throws std::invalid_argument when there are no step vectors.
double visit_prauc(const VisitPrediction& visit, int num_meds);
double visit_ddi_rate(const std::vector<int>& predicted, const Matrix& ddi);

// Each is averaged over visits within a patient, then over patients.
double jaccard(std::span<const PatientPredictions> patients);
double f1(std::span<const PatientPredictions> patients);
double prauc(std::span<const PatientPredictions> patients, int num_meds);
double ddi_rate(std::span<const PatientPredictions> patients, const Matrix& ddi);
double avg_drug_count(std::span<const PatientPredictions> patients);

struct MetricSummary {
  double jaccard = 0;
  double f1 = 0;
  double prauc = 0;
  double ddi = 0;
  double avg_drugs = 0;
};

MetricSummary summarize(std::span<const PatientPredictions> patients, const Matrix& ddi,
                        int num_meds);

struct MetricStat {
  double mean = 0;
  double std = 0;  // population standard deviation across rounds
};

struct BootstrapReport {
  MetricStat jaccard, f1, prauc, ddi, avg_drugs;
  int rounds = 0;
  double frac = 0;
  int sample_size = 0;
  std::vector<MetricSummary> per_round;

  // {"jaccard": {"mean", "std"}, ...} plus a "protocol" entry.
  std::string to_json() const;
};

// `rounds` independent subsamples of floor(frac * n) patients, drawn without
// replacement within a round.
BootstrapReport bootstrap(std::span<const PatientPredictions> patients, const Matrix& ddi,
                          int num_meds, int rounds, double frac, std::uint64_t seed);

MetricStat mean_std(std::span<const double> values);

}  // namespace cognet
