#pragma once

#include "cognet/beam_search.hpp"
#include "cognet/ehr_data.hpp"
#include "cognet/metrics.hpp"
#include "cognet/model.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace cognet {

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 16;
  int epochs = 50;
  std::uint64_t seed = 1203;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 0.0;  // global L2 norm; 0 disables
  LabelOrder label_order = LabelOrder::rare_first;
  AblationFlags ablations;
  // Decoding used for the per-epoch validation pass; width 1 is greedy.
  int validation_beam_width = 1;

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

class Adam {
 public:
  Adam(ad::ParameterSet& params, double lr, double beta1, double beta2, double eps);

  // `grads` is indexed like the parameter set; empty entries are zero.
  void step(const std::vector<Matrix>& grads);
  long long steps() const { return t_; }

 private:
  ad::ParameterSet* params_;
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<Matrix> m_, v_;
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean per target token
  bool has_validation = false;
  MetricSummary validation;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_validation_jaccard = 0.0;
};

struct Batch {
  std::vector<std::pair<int, int>> samples;  // (patient index, visit index)
};

// Mean per-token loss and summed gradients for one batch, recorded on a
// single tape. Gradient vector is indexed like the parameter set.
struct BatchGradient {
  double loss = 0.0;
  int tokens = 0;
  std::vector<Matrix> grads;
};

BatchGradient batch_gradient(const CognetModel& model, const GraphOperators& graphs,
                             const std::vector<PatientRecord>& patients, const Batch& batch,
                             const DropoutContext& drop = {});

// Mean per-token teacher-forced loss over every visit of `patients`.
double dataset_loss(const CognetModel& model, const GraphOperators& graphs,
                    const std::vector<PatientRecord>& patients);

using EpochCallback = std::function<void(const EpochLog&)>;

// Trains `model` in place on `bundle.train` after reordering medications per
// config.label_order. When a validation split exists the parameters with the
// best validation Jaccard are restored at the end. Throws DivergenceError on
// a non-finite loss.
TrainResult train(CognetModel& model, const DatasetBundle& bundle, const MedGraphPair& graphs,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

std::string metric_log_header();
std::string metric_log_row(const EpochLog& e);

}  // namespace cognet
