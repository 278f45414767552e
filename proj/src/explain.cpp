#include "cognet/explain.hpp"

#include <nlohmann/json.hpp>

#include <set>

namespace cognet {

ExplainReport explain_visit(const InferenceSession& session, const PatientRecord& patient,
                            int visit, const DecodeOptions& options) {
  const int n = static_cast<int>(patient.visits.size());
  if (visit < 1 || visit > n) {
    throw ValidationError("visit " + std::to_string(visit) + " out of range 1.." + std::to_string(n));
  }
  if (visit == 1) throw ValidationError("visit 1 has no medication history to copy from");
  if (session.model().ablations().no_copy) {
    throw ValidationError("model was trained without the copy path");
  }
  const auto contexts = session.contexts(patient);
  const FrozenContext& ctx = contexts[static_cast<std::size_t>(visit - 1)];
  const Visit& target = patient.visits[static_cast<std::size_t>(visit - 1)];
  const VisitPrediction pred = recommend(session, ctx, target, options);

  ExplainReport r;
  r.patient_id = patient.patient_id;
  r.visit = visit;
  r.recommended = pred.recommended;
  const std::set<int> hist(ctx.history_med_ids.begin(), ctx.history_med_ids.end());
  r.history_meds.assign(hist.begin(), hist.end());

  const ModelDims& dims = session.model().dims();
  std::vector<int> prefix{dims.start()};
  std::vector<int> chosen = pred.recommended;
  if (static_cast<int>(chosen.size()) < options.max_len) chosen.push_back(dims.end());
  for (int token : chosen) {
    const StepDistribution s = session.step(ctx, prefix);
    ExplainStep e;
    e.token = token;
    e.generate_weight = s.generate_weight;
    for (int m : r.history_meds) e.copy_probs.push_back(s.copied ? s.copy(m) : 0.0);
    if (r.visit_weights.empty() && s.visit_weights.size() > 0) {
      r.visit_weights.assign(s.visit_weights.data(), s.visit_weights.data() + s.visit_weights.size());
    }
    r.steps.push_back(std::move(e));
    prefix.push_back(token);
  }
  return r;
}

std::string ExplainReport::to_json(const CodeVocabulary& meds) const {
  using nlohmann::json;
  auto code = [&](int id) -> std::string {
    if (id == start_token(static_cast<int>(meds.size()))) return "<START>";
    if (id == end_token(static_cast<int>(meds.size()))) return "<END>";
    return meds.code(id);
  };
  json hist = json::array();
  for (int m : history_meds) hist.push_back({{"id", m}, {"code", code(m)}});
  json steps_j = json::array();
  json matrix = json::array();
  for (std::size_t i = 0; i < steps.size(); ++i) {
    steps_j.push_back({{"step", i + 1},
                       {"token", steps[i].token},
                       {"code", code(steps[i].token)},
                       {"generate_weight", steps[i].generate_weight}});
    matrix.push_back(steps[i].copy_probs);
  }
  json rec = json::array();
  for (int m : recommended) rec.push_back(code(m));
  const json j = {
      {"patient_id", patient_id},
      {"visit", visit},
      {"history_medications", hist},
      {"visit_weights", visit_weights},
      {"steps", steps_j},
      {"copy_probabilities", matrix},
      {"recommended", rec},
  };
  return j.dump(2);
}

}  // namespace cognet
