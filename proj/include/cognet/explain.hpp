#pragma once

#include "cognet/beam_search.hpp"
#include "cognet/ehr_data.hpp"

#include <string>
#include <vector>

namespace cognet {

struct ExplainStep {
  int token = 0;                  // token emitted at this step
  std::vector<double> copy_probs; // Pr_c over ExplainReport::history_meds
  double generate_weight = 1.0;   // w_g
};

struct ExplainReport {
  std::string patient_id;
  int visit = 0;                  // 1-based visit number
  std::vector<int> history_meds;  // distinct medication ids seen in earlier visits, ascending
  std::vector<double> visit_weights;  // c_j for j = 1 .. visit-1
  std::vector<ExplainStep> steps;
  std::vector<int> recommended;

  std::string to_json(const CodeVocabulary& meds) const;
};

// Decodes visit `visit` (1-based) of `patient` and records the copy
// distribution along the chosen hypothesis. Visit 1 has no history and
// raises ValidationError, as does a model trained without the copy path.
ExplainReport explain_visit(const InferenceSession& session, const PatientRecord& patient,
                            int visit, const DecodeOptions& options);

}  // namespace cognet
