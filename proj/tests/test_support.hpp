#pragma once

#include "cognet/beam_search.hpp"
#include "cognet/copy_decoder.hpp"
#include "cognet/ehr_data.hpp"
#include "cognet/med_graph.hpp"
#include "cognet/model.hpp"

#include <random>
#include <set>
#include <string>
#include <vector>

namespace cognet::testing {

inline ModelConfig tiny_config(int s = 8, int heads = 2, std::uint64_t seed = 1203) {
  ModelConfig c;
  c.embed_dim = s;
  c.heads = heads;
  c.gate_hidden = 4;
  c.max_len = 8;
  c.beam_width = 2;
  c.init_seed = seed;
  return c;
}

inline std::vector<int> random_subset(std::mt19937_64& rng, int bound, int lo, int hi) {
  std::uniform_int_distribution<int> count(lo, hi);
  std::vector<int> all(static_cast<std::size_t>(bound));
  for (int i = 0; i < bound; ++i) all[static_cast<std::size_t>(i)] = i;
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(static_cast<std::size_t>(count(rng)));
  return all;
}

inline PatientRecord random_patient(std::mt19937_64& rng, const ModelDims& dims, int visits,
                                    int max_meds = 3) {
  PatientRecord p;
  p.patient_id = "T" + std::to_string(rng() % 100000);
  for (int v = 0; v < visits; ++v) {
    Visit visit;
    visit.diagnoses = random_subset(rng, dims.num_diagnoses, 1, 3);
    std::sort(visit.diagnoses.begin(), visit.diagnoses.end());
    visit.procedures = random_subset(rng, dims.num_procedures, 0, 2);
    std::sort(visit.procedures.begin(), visit.procedures.end());
    visit.medications = random_subset(rng, dims.num_meds, 1, max_meds);
    p.visits.push_back(std::move(visit));
  }
  return p;
}

inline Matrix random_graph(std::mt19937_64& rng, int n, double density) {
  std::bernoulli_distribution edge(density);
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (edge(rng)) a(i, j) = a(j, i) = 1.0;
    }
  }
  return a;
}

// Perturbs every parameter so biases, gains and lambda leave their defaults.
inline void jitter_parameters(CognetModel& model, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& p : model.params()) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value(i) += u(rng);
  }
}

inline StepFunction table_step(std::function<RowVector(std::span<const int>)> f) { return f; }

}  // namespace cognet::testing

namespace cognet::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
  std::vector<std::string> groups_without_gradient;
};

// Relative error |a - n| / max(|a|, |n|, floor) between analytic and central
// difference gradients of the teacher-forced loss of visit t.
inline GradCheckResult gradient_check(CognetModel& model, const GraphOperators& graphs,
                                      const PatientRecord& patient, int t, double step = 1e-5,
                                      double floor = 1e-5) {
  auto loss = [&]() {
    ad::Tape tape(false);
    const ad::Var rel = relation_embeddings(tape, model, graphs);
    return sequence_loss(tape, model, rel, patient, t).loss.scalar();
  };
  ad::Tape tape;
  const ad::Var rel = relation_embeddings(tape, model, graphs);
  const SequenceLoss s = sequence_loss(tape, model, rel, patient, t);
  tape.backward(s.loss);
  std::vector<Matrix> analytic(model.params().size());
  for (auto& [i, g] : tape.parameter_grads()) analytic[static_cast<std::size_t>(i)] = g;

  GradCheckResult r;
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    auto& p = model.params()[i];
    Matrix a = analytic[i].size() ? analytic[i] : Matrix::Zero(p.value.rows(), p.value.cols());
    if (analytic[i].size() == 0) r.groups_without_gradient.push_back(p.name);
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      const double orig = p.value(k);
      p.value(k) = orig + step;
      const double up = loss();
      p.value(k) = orig - step;
      const double down = loss();
      p.value(k) = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double denom = std::max({std::abs(a(k)), std::abs(numeric), floor});
      const double rel = std::abs(a(k) - numeric) / denom;
      ++r.checked;
      if (rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst_param = p.name + "[" + std::to_string(k) + "]";
      }
    }
  }
  return r;
}

}  // namespace cognet::testing
