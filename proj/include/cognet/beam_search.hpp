#pragma once

#include "cognet/copy_decoder.hpp"
#include "cognet/metrics.hpp"

#include <functional>
#include <span>
#include <vector>

namespace cognet {

// Distribution over the decoder vocabulary for the next token given the
// prefix generated so far (prefix[0] is START).
using StepFunction = std::function<RowVector(std::span<const int> prefix)>;

struct BeamHypothesis {
  std::vector<int> tokens;  // START first, END last when terminated by END
  double log_prob = 0.0;
  bool finished = false;
  std::vector<RowVector> step_probs;  // distribution each chosen token was drawn from

  // Clinical medications in emission order, START/END stripped.
  std::vector<int> medications(int start, int end) const;
};

struct SearchLimits {
  int start = 0;
  int end = 1;
  int beam_width = 4;
  int max_len = 45;  // generated tokens, END included
};

// Standard beam search without length normalization. Finished hypotheses
// occupy beam slots; the best finished one by cumulative log-probability
// wins, ties resolved by the lexicographically smaller token sequence.
BeamHypothesis beam_search(const StepFunction& step, const SearchLimits& limits);

// Argmax decoding; ties pick the lowest token id.
BeamHypothesis greedy_decode(const StepFunction& step, const SearchLimits& limits);

struct DecodeOptions {
  int beam_width = 4;
  int max_len = 45;
  bool greedy = false;
};

// Decodes visit `t` of `patient` whose contexts were produced by `session`.
VisitPrediction recommend(const InferenceSession& session, const FrozenContext& context,
                          const Visit& visit, const DecodeOptions& options);

std::vector<PatientPredictions> predict(const InferenceSession& session,
                                        std::span<const PatientRecord> patients,
                                        const DecodeOptions& options);

}  // namespace cognet
