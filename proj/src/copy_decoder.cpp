#include "cognet/copy_decoder.hpp"

#include <cmath>
#include <stdexcept>

namespace cognet {

using ad::Var;

namespace {

bool uses_copy(const CognetModel& m) { return !m.ablations().no_copy; }
bool uses_visit_scores(const CognetModel& m) {
  return uses_copy(m) && !m.ablations().no_visit_scores;
}

struct VisitParts {
  Var diagnoses, procedures, diag_vector, proc_vector, meds;
};

VisitParts encode_parts(ad::Tape& tape, const CognetModel& model, const Visit& visit,
                        bool as_current, bool as_history, const DropoutContext& drop) {
  const auto& ab = model.ablations();
  const bool vectors = uses_visit_scores(model);
  VisitParts parts;
  if (!ab.no_diagnoses && (as_current || vectors)) {
    parts.diagnoses = encode_diagnoses(tape, model, visit.diagnoses, drop);
    if (vectors) parts.diag_vector = gated_aggregate(parts.diagnoses, model.copy.diagnosis_gate);
  }
  if (!ab.no_procedures && (as_current || vectors)) {
    parts.procedures = encode_procedures(tape, model, visit.procedures, drop);
    if (vectors) parts.proc_vector = gated_aggregate(parts.procedures, model.copy.procedure_gate);
  }
  if (as_history && uses_copy(model)) {
    parts.meds = encode_past_medications(tape, model, visit.medications, drop);
  }
  return parts;
}

VisitContext assemble(const CognetModel& model, const std::vector<VisitParts>& parts,
                      const PatientRecord& patient, int t) {
  VisitContext ctx;
  const VisitParts& cur = parts[static_cast<std::size_t>(t)];
  ctx.diagnoses = cur.diagnoses;
  ctx.procedures = cur.procedures;
  ctx.diag_vector = cur.diag_vector;
  ctx.proc_vector = cur.proc_vector;
  if (!uses_copy(model) || t == 0) return ctx;

  ctx.history_visits = t;
  std::vector<Var> dv, pv, meds;
  for (int j = 0; j < t; ++j) {
    const VisitParts& p = parts[static_cast<std::size_t>(j)];
    if (p.diag_vector) dv.push_back(p.diag_vector);
    if (p.proc_vector) pv.push_back(p.proc_vector);
    meds.push_back(p.meds);
    for (int m : patient.visits[static_cast<std::size_t>(j)].medications) {
      ctx.history_med_ids.push_back(m);
      ctx.history_visit_of.push_back(j);
    }
  }
  if (!dv.empty()) ctx.history_diag_vectors = ad::concat_rows(dv);
  if (!pv.empty()) ctx.history_proc_vectors = ad::concat_rows(pv);
  ctx.history_meds = ad::concat_rows(meds);
  return ctx;
}

void check_visit_index(const PatientRecord& patient, int t) {
  if (t < 0 || t >= static_cast<int>(patient.visits.size())) {
    throw ValidationError("visit index " + std::to_string(t) + " outside patient " +
                          patient.patient_id);
  }
}

Matrix value_or_empty(Var v) { return v ? v.value() : Matrix(); }

Var constant_or_empty(ad::Tape& tape, const Matrix& m) {
  return m.size() == 0 ? Var{} : tape.constant(m);
}

double inv_sqrt_dim(const CognetModel& model) {
  return 1.0 / std::sqrt(static_cast<double>(model.config().embed_dim));
}

}  // namespace

VisitContext FrozenContext::thaw(ad::Tape& tape) const {
  VisitContext ctx;
  ctx.diagnoses = constant_or_empty(tape, diagnoses);
  ctx.procedures = constant_or_empty(tape, procedures);
  ctx.diag_vector = constant_or_empty(tape, diag_vector);
  ctx.proc_vector = constant_or_empty(tape, proc_vector);
  ctx.history_visits = history_visits;
  ctx.history_diag_vectors = constant_or_empty(tape, history_diag_vectors);
  ctx.history_proc_vectors = constant_or_empty(tape, history_proc_vectors);
  ctx.history_meds = constant_or_empty(tape, history_meds);
  ctx.history_med_ids = history_med_ids;
  ctx.history_visit_of = history_visit_of;
  return ctx;
}

FrozenContext freeze(const VisitContext& ctx) {
  FrozenContext f;
  f.diagnoses = value_or_empty(ctx.diagnoses);
  f.procedures = value_or_empty(ctx.procedures);
  f.diag_vector = value_or_empty(ctx.diag_vector);
  f.proc_vector = value_or_empty(ctx.proc_vector);
  f.history_visits = ctx.history_visits;
  f.history_diag_vectors = value_or_empty(ctx.history_diag_vectors);
  f.history_proc_vectors = value_or_empty(ctx.history_proc_vectors);
  f.history_meds = value_or_empty(ctx.history_meds);
  f.history_med_ids = ctx.history_med_ids;
  f.history_visit_of = ctx.history_visit_of;
  return f;
}

VisitContext encode_visit_context(ad::Tape& tape, const CognetModel& model,
                                  const PatientRecord& patient, int t, const DropoutContext& drop) {
  check_visit_index(patient, t);
  std::vector<VisitParts> parts;
  for (int j = 0; j <= t; ++j) {
    parts.push_back(encode_parts(tape, model, patient.visits[static_cast<std::size_t>(j)], j == t,
                                 j < t, drop));
  }
  return assemble(model, parts, patient, t);
}

std::vector<FrozenContext> encode_patient_contexts(const CognetModel& model,
                                                   const PatientRecord& patient) {
  ad::Tape tape(false);
  const int n = static_cast<int>(patient.visits.size());
  std::vector<VisitParts> parts;
  for (int j = 0; j < n; ++j) {
    parts.push_back(encode_parts(tape, model, patient.visits[static_cast<std::size_t>(j)], true,
                                 j + 1 < n, {}));
  }
  std::vector<FrozenContext> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) out.push_back(freeze(assemble(model, parts, patient, t)));
  return out;
}

Var relation_embeddings(ad::Tape& tape, const CognetModel& model, const GraphOperators& graphs) {
  const auto& dims = model.dims();
  const int s = model.config().embed_dim;
  if (model.ablations().no_graphs) return tape.constant(Matrix::Zero(dims.decoder_vocab(), s));
  if (graphs.ehr.rows() != dims.num_meds || graphs.ddi.rows() != dims.num_meds) {
    throw ValidationError("graph size does not match the medication vocabulary");
  }
  Var clinical = ad::slice_rows(tape.param(*model.medication_embedding), 0, dims.num_meds);
  Var eg = encode_medication_relations(clinical, graphs, model.graph);
  const Var parts[] = {eg, tape.constant(Matrix::Zero(2, s))};
  return ad::concat_rows(parts);
}

Var decoder_hidden(const CognetModel& model, Var relation, const VisitContext& ctx,
                   std::span<const int> inputs, const DropoutContext& drop) {
  if (inputs.empty()) throw std::invalid_argument("decoder needs at least the START token");
  ad::Tape& tape = *relation.tape;
  const double eps = model.config().layer_norm_eps;
  const auto& dec = model.decoder;

  Var embedded = ad::add(ad::gather_rows(tape.param(*model.medication_embedding), inputs),
                         ad::gather_rows(relation, inputs));
  const AttentionMask causal = causal_mask(static_cast<Eigen::Index>(inputs.size()));
  Var self = dropout(multi_head(embedded, embedded, embedded, dec.self_attention, &causal),
                     drop.rate, drop.rng);
  Var h1 = layer_norm_residual(embedded, self, dec.self_norm, eps);

  Var cross;
  if (ctx.diagnoses) cross = multi_head(h1, ctx.diagnoses, ctx.diagnoses, dec.diagnosis_attention);
  if (ctx.procedures) {
    Var p = multi_head(h1, ctx.procedures, ctx.procedures, dec.procedure_attention);
    cross = cross ? ad::add(cross, p) : p;
  }
  if (!cross) {
    return ad::layer_norm_rows(h1, tape.param(*dec.cross_norm.gamma),
                               tape.param(*dec.cross_norm.beta), eps);
  }
  return layer_norm_residual(h1, dropout(cross, drop.rate, drop.rng), dec.cross_norm, eps);
}

Var generation_distribution(const CognetModel& model, Var hidden) {
  ad::Tape& tape = *hidden.tape;
  Var logits = ad::add_row(ad::matmul(hidden, tape.param(*model.copy.w_gen)),
                           tape.param(*model.copy.b_gen));
  Matrix mask = Matrix::Zero(logits.rows(), logits.cols());
  mask.col(model.dims().start()).setConstant(-1e9);
  return ad::softmax_rows(logits, &mask);
}

Var visit_scores(const CognetModel& model, const VisitContext& ctx) {
  if (!ctx.has_history()) throw std::invalid_argument("visit_scores needs at least one past visit");
  Var logits;
  if (ctx.diag_vector && ctx.history_diag_vectors) {
    logits = ad::matmul(ctx.diag_vector, ad::transpose(ctx.history_diag_vectors));
  }
  if (ctx.proc_vector && ctx.history_proc_vectors) {
    Var p = ad::matmul(ctx.proc_vector, ad::transpose(ctx.history_proc_vectors));
    logits = logits ? ad::add(logits, p) : p;
  }
  if (!logits) {
    ad::Tape& tape = *ctx.history_meds.tape;
    logits = tape.constant(Matrix::Zero(1, ctx.history_visits));
  }
  return ad::softmax_rows(ad::scale(logits, inv_sqrt_dim(model)));
}

Var medication_scores(const CognetModel& model, Var hidden, const VisitContext& ctx) {
  if (!ctx.has_history()) throw std::invalid_argument("medication_scores needs history");
  ad::Tape& tape = *hidden.tape;
  Var query = ad::matmul(hidden, tape.param(*model.copy.w_copy));
  Var logits = ad::matmul(query, ad::transpose(ctx.history_meds));
  return ad::softmax_rows(ad::scale(logits, inv_sqrt_dim(model)));
}

Var copy_distribution(Var med_scores, Var visit_weights, const VisitContext& ctx,
                      int decoder_vocab) {
  ad::Tape& tape = *med_scores.tape;
  const auto n = static_cast<Eigen::Index>(ctx.history_med_ids.size());
  if (med_scores.cols() != n) throw std::invalid_argument("copy_distribution: q width mismatch");

  Matrix scatter = Matrix::Zero(n, decoder_vocab);
  for (Eigen::Index k = 0; k < n; ++k) scatter(k, ctx.history_med_ids[static_cast<std::size_t>(k)]) = 1.0;

  Var weights = med_scores;
  if (visit_weights) {
    Matrix owner = Matrix::Zero(ctx.history_visits, n);
    for (Eigen::Index k = 0; k < n; ++k) owner(ctx.history_visit_of[static_cast<std::size_t>(k)], k) = 1.0;
    Var per_row = ad::matmul(visit_weights, tape.constant(std::move(owner)));  // 1 x N
    Var expanded = ad::matmul(tape.constant(Matrix::Ones(med_scores.rows(), 1)), per_row);
    weights = ad::cmul(med_scores, expanded);
  }
  return ad::normalize_rows(ad::matmul(weights, tape.constant(std::move(scatter))));
}

MixedDistribution copy_mix(const CognetModel& model, Var gen, Var copy, Var hidden) {
  ad::Tape& tape = *hidden.tape;
  Var w = ad::sigmoid(ad::add_row(ad::matmul(hidden, tape.param(*model.copy.w_mix)),
                                  tape.param(*model.copy.b_mix)));
  Var probs = ad::add(ad::mul_col(gen, w), ad::mul_col(copy, ad::one_minus(w)));
  return {probs, w};
}

Var mask_generated(Var probs, std::span<const int> inputs, const ModelDims& dims) {
  Matrix keep = Matrix::Ones(probs.rows(), probs.cols());
  keep.col(dims.start()).setZero();
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    for (Eigen::Index j = 1; j <= i; ++j) {
      const int m = inputs[static_cast<std::size_t>(j)];
      if (m >= 0 && m < dims.num_meds) keep(i, m) = 0.0;
    }
  }
  return ad::normalize_rows(ad::cmul(probs, probs.tape->constant(std::move(keep))));
}

DecoderOutputs decode_sequence(const CognetModel& model, Var relation, const VisitContext& ctx,
                               std::span<const int> inputs, const DropoutContext& drop) {
  DecoderOutputs out;
  out.hidden = decoder_hidden(model, relation, ctx, inputs, drop);
  out.generation = generation_distribution(model, out.hidden);
  Var probs = out.generation;
  if (!model.ablations().no_copy && ctx.has_history()) {
    out.copied = true;
    if (!model.ablations().no_visit_scores) out.visit_weights = visit_scores(model, ctx);
    out.med_scores = medication_scores(model, out.hidden, ctx);
    out.copy = copy_distribution(out.med_scores, out.visit_weights, ctx,
                                 model.dims().decoder_vocab());
    MixedDistribution mix = copy_mix(model, out.generation, out.copy, out.hidden);
    out.generate_weight = mix.generate_weight;
    probs = mix.probs;
  }
  out.probs = mask_generated(probs, inputs, model.dims());
  return out;
}

std::vector<int> teacher_inputs(const Visit& visit, const ModelDims& dims) {
  std::vector<int> in{dims.start()};
  for (int m : visit.medications) {
    if (m < 0 || m >= dims.num_meds) throw ValidationError("medication id out of vocabulary");
    in.push_back(m);
  }
  return in;
}

std::vector<int> teacher_targets(const Visit& visit, const ModelDims& dims) {
  std::vector<int> out;
  for (int m : visit.medications) {
    if (m < 0 || m >= dims.num_meds) throw ValidationError("medication id out of vocabulary");
    out.push_back(m);
  }
  out.push_back(dims.end());
  return out;
}

SequenceLoss sequence_loss(ad::Tape& tape, const CognetModel& model, Var relation,
                           const PatientRecord& patient, int t, const DropoutContext& drop) {
  check_visit_index(patient, t);
  const Visit& visit = patient.visits[static_cast<std::size_t>(t)];
  if (visit.medications.empty()) throw ValidationError("training visit without medications");
  const VisitContext ctx = encode_visit_context(tape, model, patient, t, drop);
  const auto inputs = teacher_inputs(visit, model.dims());
  const auto targets = teacher_targets(visit, model.dims());
  const DecoderOutputs out = decode_sequence(model, relation, ctx, inputs, drop);
  return {ad::nll_rows(out.probs, targets), static_cast<int>(targets.size())};
}

InferenceSession::InferenceSession(const CognetModel& model, const GraphOperators& graphs)
    : model_(&model) {
  ad::Tape tape(false);
  relation_ = relation_embeddings(tape, model, graphs).value();
}

std::vector<FrozenContext> InferenceSession::contexts(const PatientRecord& patient) const {
  return encode_patient_contexts(*model_, patient);
}

StepDistribution InferenceSession::step(const FrozenContext& frozen,
                                        std::span<const int> generated) const {
  if (generated.empty() || generated.front() != model_->dims().start()) {
    throw std::invalid_argument("generated prefix must begin with START");
  }
  ad::Tape tape(false);
  const VisitContext ctx = frozen.thaw(tape);
  const Var relation = tape.constant(relation_);
  const DecoderOutputs out = decode_sequence(*model_, relation, ctx, generated);
  const Eigen::Index last = out.probs.rows() - 1;
  StepDistribution s;
  s.probs = out.probs.value().row(last);
  s.generation = out.generation.value().row(last);
  s.copied = out.copied;
  if (out.copied) {
    s.copy = out.copy.value().row(last);
    s.generate_weight = out.generate_weight.value()(last, 0);
    if (out.visit_weights) s.visit_weights = out.visit_weights.value().row(0);
  }
  return s;
}

}  // namespace cognet
