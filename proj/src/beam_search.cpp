#include "cognet/beam_search.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cognet {

std::vector<int> BeamHypothesis::medications(int start, int end) const {
  std::vector<int> out;
  for (int tok : tokens) {
    if (tok != start && tok != end) out.push_back(tok);
  }
  return out;
}

namespace {

void check_limits(const SearchLimits& l) {
  if (l.beam_width < 1) throw ValidationError("beam width must be >= 1");
  if (l.max_len < 1) throw ValidationError("max_len must be >= 1");
}

bool better(const BeamHypothesis& a, const BeamHypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.tokens < b.tokens;
}

bool is_finished(const BeamHypothesis& h, const SearchLimits& l) {
  return h.tokens.back() == l.end || static_cast<int>(h.tokens.size()) - 1 >= l.max_len;
}

RowVector checked_step(const StepFunction& step, const std::vector<int>& prefix) {
  RowVector p = step(prefix);
  if (p.size() == 0) throw std::runtime_error("step function returned empty vector");
  if (!p.allFinite()) throw DivergenceError("non-finite decode probabilities");
  return p;
}

}  // namespace

BeamHypothesis beam_search(const StepFunction& step, const SearchLimits& limits) {
  check_limits(limits);
  std::vector<BeamHypothesis> live(1);
  live[0].tokens = {limits.start};
  std::vector<BeamHypothesis> finished;

  while (!live.empty()) {
    std::vector<BeamHypothesis> candidates;
    for (const auto& h : live) {
      const RowVector p = checked_step(step, h.tokens);
      for (Eigen::Index tok = 0; tok < p.size(); ++tok) {
        if (!(p(tok) > 0.0)) continue;
        BeamHypothesis c = h;
        c.tokens.push_back(static_cast<int>(tok));
        c.log_prob += std::log(p(tok));
        c.step_probs.push_back(p);
        candidates.push_back(std::move(c));
      }
    }
    // Finished hypotheses compete for the same slots.
    for (auto& f : finished) candidates.push_back(std::move(f));
    finished.clear();
    std::sort(candidates.begin(), candidates.end(), better);
    if (static_cast<int>(candidates.size()) > limits.beam_width) {
      candidates.resize(static_cast<std::size_t>(limits.beam_width));
    }
    live.clear();
    for (auto& c : candidates) {
      if (c.finished || is_finished(c, limits)) {
        c.finished = true;
        finished.push_back(std::move(c));
      } else {
        live.push_back(std::move(c));
      }
    }
  }
  if (finished.empty()) throw std::runtime_error("beam search produced no hypothesis");
  return *std::min_element(finished.begin(), finished.end(), better);
}

BeamHypothesis greedy_decode(const StepFunction& step, const SearchLimits& limits) {
  check_limits(limits);
  BeamHypothesis h;
  h.tokens = {limits.start};
  while (!is_finished(h, limits)) {
    const RowVector p = checked_step(step, h.tokens);
    Eigen::Index best = 0;
    for (Eigen::Index tok = 1; tok < p.size(); ++tok) {
      if (p(tok) > p(best)) best = tok;
    }
    if (!(p(best) > 0.0)) throw std::runtime_error("greedy decoding hit an all-zero distribution");
    h.tokens.push_back(static_cast<int>(best));
    h.log_prob += std::log(p(best));
    h.step_probs.push_back(p);
  }
  h.finished = true;
  return h;
}

VisitPrediction recommend(const InferenceSession& session, const FrozenContext& context,
                          const Visit& visit, const DecodeOptions& options) {
  const ModelDims& dims = session.model().dims();
  const StepFunction step = [&](std::span<const int> prefix) {
    return session.step(context, prefix).probs;
  };
  const SearchLimits limits{dims.start(), dims.end(), options.beam_width, options.max_len};
  const BeamHypothesis best =
      options.greedy ? greedy_decode(step, limits) : beam_search(step, limits);
  VisitPrediction out;
  out.recommended = best.medications(dims.start(), dims.end());
  out.step_probs = best.step_probs;
  out.truth = visit.medications;
  return out;
}

std::vector<PatientPredictions> predict(const InferenceSession& session,
                                        std::span<const PatientRecord> patients,
                                        const DecodeOptions& options) {
  std::vector<PatientPredictions> out;
  out.reserve(patients.size());
  for (const auto& patient : patients) {
    const auto contexts = session.contexts(patient);
    PatientPredictions visits;
    for (std::size_t t = 0; t < patient.visits.size(); ++t) {
      visits.push_back(recommend(session, contexts[t], patient.visits[t], options));
    }
    out.push_back(std::move(visits));
  }
  return out;
}

}  // namespace cognet
