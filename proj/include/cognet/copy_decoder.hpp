#pragma once

#include "cognet/encoders.hpp"
#include "cognet/model.hpp"

#include <span>
#include <vector>

namespace cognet {

// Encoded current visit plus the copy memory built from earlier visits.
struct VisitContext {
  ad::Var diagnoses;    // D'_t (absent when diagnoses are ablated)
  ad::Var procedures;   // P'_t (absent when procedures are ablated)
  ad::Var diag_vector;  // v_d of visit t
  ad::Var proc_vector;  // v_p of visit t

  int history_visits = 0;         // J = t - 1
  ad::Var history_diag_vectors;   // J x s
  ad::Var history_proc_vectors;   // J x s
  ad::Var history_meds;           // N x s, M'_1 .. M'_J stacked
  std::vector<int> history_med_ids;   // N, medication id of each stacked row
  std::vector<int> history_visit_of;  // N, past visit index j of each row

  bool has_history() const { return history_visits > 0; }
};

// VisitContext detached from any tape; thaw() re-enters it as constants.
struct FrozenContext {
  Matrix diagnoses, procedures, diag_vector, proc_vector;
  int history_visits = 0;
  Matrix history_diag_vectors, history_proc_vectors, history_meds;
  std::vector<int> history_med_ids;
  std::vector<int> history_visit_of;

  VisitContext thaw(ad::Tape& tape) const;
  bool has_history() const { return history_visits > 0; }
};

FrozenContext freeze(const VisitContext& ctx);

// Encodes visit `t` (0-based) of `patient` together with its history.
VisitContext encode_visit_context(ad::Tape& tape, const CognetModel& model,
                                  const PatientRecord& patient, int t,
                                  const DropoutContext& drop = {});

// Contexts for every visit of `patient`, encoding each visit once.
std::vector<FrozenContext> encode_patient_contexts(const CognetModel& model,
                                                   const PatientRecord& patient);

// E_g over clinical rows with zero START/END rows appended, (|M|+2) x s. All
// zeros when graphs are ablated.
ad::Var relation_embeddings(ad::Tape& tape, const CognetModel& model, const GraphOperators& graphs);

// M'' for the decoder input [START, m_1, ..., m_{i-1}], one row per position.
ad::Var decoder_hidden(const CognetModel& model, ad::Var relation, const VisitContext& ctx,
                       std::span<const int> inputs, const DropoutContext& drop = {});

// Softmax(M'' W_g + b_g) per row with START excluded, (L x |M|+2).
ad::Var generation_distribution(const CognetModel& model, ad::Var hidden);

// c = Softmax_j((v_d_j . v_d_t + v_p_j . v_p_t) / sqrt(s)), 1 x J.
ad::Var visit_scores(const CognetModel& model, const VisitContext& ctx);

// q over all stacked history rows, one softmax per decoder row (L x N).
ad::Var medication_scores(const CognetModel& model, ad::Var hidden, const VisitContext& ctx);

// Pr_c rows: sum_{j,k} q_{j,k} c_j 1{M_{j,k} = m}, normalized. Pass an empty
// `visit_weights` to drop c_j.
ad::Var copy_distribution(ad::Var med_scores, ad::Var visit_weights, const VisitContext& ctx,
                          int decoder_vocab);

struct MixedDistribution {
  ad::Var probs;        // L x V
  ad::Var generate_weight;  // w_g, L x 1
};

// Pr = w_g Pr_g + (1 - w_g) Pr_c with w_g = sigmoid(M'' W_f + b_f).
MixedDistribution copy_mix(const CognetModel& model, ad::Var gen, ad::Var copy, ad::Var hidden);

// Zeroes START and every clinical medication already in the prefix
// inputs[1..i] for row i, then renormalizes each row.
ad::Var mask_generated(ad::Var probs, std::span<const int> inputs, const ModelDims& dims);

struct DecoderOutputs {
  ad::Var hidden;
  ad::Var generation;        // Pr_g
  ad::Var visit_weights;     // c (copy path only)
  ad::Var med_scores;        // q (copy path only)
  ad::Var copy;              // Pr_c (copy path only)
  ad::Var generate_weight;   // w_g (copy path only)
  ad::Var probs;             // final Pr after duplicate masking
  bool copied = false;
};

// Full per-position distributions for a teacher-forced input sequence.
DecoderOutputs decode_sequence(const CognetModel& model, ad::Var relation, const VisitContext& ctx,
                               std::span<const int> inputs, const DropoutContext& drop = {});

// Decoder input [START, m_1..m_k] and targets [m_1..m_k, END] for a visit.
std::vector<int> teacher_inputs(const Visit& visit, const ModelDims& dims);
std::vector<int> teacher_targets(const Visit& visit, const ModelDims& dims);

struct SequenceLoss {
  ad::Var loss;  // natural-log negative log-likelihood summed over steps
  int tokens = 0;
};

SequenceLoss sequence_loss(ad::Tape& tape, const CognetModel& model, ad::Var relation,
                           const PatientRecord& patient, int t, const DropoutContext& drop = {});

// One decoding step outside any training tape.
struct StepDistribution {
  RowVector probs;         // final Pr over |M|+2 (START always 0)
  RowVector generation;    // Pr_g
  RowVector copy;          // Pr_c, empty without copy path
  RowVector visit_weights; // c, empty without copy path
  double generate_weight = 1.0;
  bool copied = false;
};

// Frozen model pieces shared by every step of inference.
class InferenceSession {
 public:
  InferenceSession(const CognetModel& model, const GraphOperators& graphs);

  const CognetModel& model() const { return *model_; }
  const Matrix& relation() const { return relation_; }

  std::vector<FrozenContext> contexts(const PatientRecord& patient) const;

  // `generated` starts with START.
  StepDistribution step(const FrozenContext& ctx, std::span<const int> generated) const;

 private:
  const CognetModel* model_;
  Matrix relation_;
};

}  // namespace cognet
