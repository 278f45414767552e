#pragma once

#include "cognet/model.hpp"

#include <random>
#include <span>
#include <utility>

namespace cognet {

// Optional stochastic regularization for training passes.
struct DropoutContext {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;
};

// Self-attention block(s) over a set of embedded rows (no positional signal).
ad::Var encode_set(ad::Var rows, const SetEncoderParams& params, double eps,
                   const DropoutContext& drop = {});

// D'_t. Throws ValidationError on an empty set or an out-of-range id.
ad::Var encode_diagnoses(ad::Tape& tape, const CognetModel& model, std::span<const int> ids,
                         const DropoutContext& drop = {});
// P'_t. An empty procedure set is encoded as the single NULL-procedure row.
ad::Var encode_procedures(ad::Tape& tape, const CognetModel& model, std::span<const int> ids,
                          const DropoutContext& drop = {});
// M'_j over the plain medication embeddings of a past visit.
ad::Var encode_past_medications(ad::Tape& tape, const CognetModel& model,
                                std::span<const int> ids, const DropoutContext& drop = {});

struct ConditionVectors {
  ad::Var diagnosis;  // v_d, 1 x s
  ad::Var procedure;  // v_p, 1 x s
};

ConditionVectors visit_condition_vectors(ad::Var diagnoses, ad::Var procedures,
                                         const GateParams& diagnosis_gate,
                                         const GateParams& procedure_gate);

}  // namespace cognet
