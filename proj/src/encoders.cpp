#include "cognet/encoders.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace cognet {

using ad::Var;

Var encode_set(Var rows, const SetEncoderParams& params, double eps, const DropoutContext& drop) {
  Var h = rows;
  for (const EncoderBlock& block : params.blocks) {
    Var attended = dropout(multi_head(h, h, h, block.attention), drop.rate, drop.rng);
    h = layer_norm_residual(h, attended, block.attention_norm, eps);
    Var fed = dropout(ffn(h, block.ffn), drop.rate, drop.rng);
    h = layer_norm_residual(h, fed, block.ffn_norm, eps);
  }
  return h;
}

namespace {

void check_ids(std::span<const int> ids, int bound, const char* what) {
  for (int id : ids) {
    if (id < 0 || id >= bound) {
      throw ValidationError(std::string(what) + " id out of range: " + std::to_string(id));
    }
  }
}

}  // namespace

Var encode_diagnoses(ad::Tape& tape, const CognetModel& model, std::span<const int> ids,
                     const DropoutContext& drop) {
  if (ids.empty()) throw ValidationError("diagnosis set is empty");
  check_ids(ids, model.dims().num_diagnoses, "diagnosis");
  Var rows = ad::gather_rows(tape.param(*model.diagnosis_embedding), ids);
  return encode_set(rows, model.diagnosis_encoder, model.config().layer_norm_eps, drop);
}

Var encode_procedures(ad::Tape& tape, const CognetModel& model, std::span<const int> ids,
                      const DropoutContext& drop) {
  check_ids(ids, model.dims().num_procedures, "procedure");
  const int null_row[] = {model.null_procedure()};
  Var rows = ids.empty() ? ad::gather_rows(tape.param(*model.procedure_embedding), null_row)
                         : ad::gather_rows(tape.param(*model.procedure_embedding), ids);
  return encode_set(rows, model.procedure_encoder, model.config().layer_norm_eps, drop);
}

Var encode_past_medications(ad::Tape& tape, const CognetModel& model, std::span<const int> ids,
                            const DropoutContext& drop) {
  if (ids.empty()) throw ValidationError("past medication set is empty");
  check_ids(ids, model.dims().num_meds, "medication");
  Var rows = ad::gather_rows(tape.param(*model.medication_embedding), ids);
  return encode_set(rows, model.medication_encoder, model.config().layer_norm_eps, drop);
}

ConditionVectors visit_condition_vectors(Var diagnoses, Var procedures,
                                         const GateParams& diagnosis_gate,
                                         const GateParams& procedure_gate) {
  if (diagnoses.rows() == 0 || procedures.rows() == 0) {
    throw std::invalid_argument("visit_condition_vectors: empty input");
  }
  return {gated_aggregate(diagnoses, diagnosis_gate), gated_aggregate(procedures, procedure_gate)};
}

}  // namespace cognet
