#pragma once

#include "cognet/autodiff.hpp"
#include "cognet/med_graph.hpp"
#include "cognet/nn.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace cognet {

// Component switches matching the ablation variants.
struct AblationFlags {
  bool no_copy = false;          // Pr = Pr_g
  bool no_visit_scores = false;  // copy weights use q alone, c_j dropped
  bool no_graphs = false;        // relation embeddings E_g zeroed
  bool no_diagnoses = false;     // diagnosis condition removed from decoder and c_j
  bool no_procedures = false;    // procedure condition removed from decoder and c_j

  bool operator==(const AblationFlags&) const = default;
};

// Comma separated subset of {copy, visit_scores, graphs, diagnoses, procedures}.
AblationFlags parse_ablations(std::string_view list);
std::string to_string(const AblationFlags& flags);

struct ModelDims {
  int num_diagnoses = 0;
  int num_procedures = 0;
  int num_meds = 0;  // clinical medications; the decoder vocabulary adds START/END

  int decoder_vocab() const { return num_meds + 2; }
  int start() const { return start_token(num_meds); }
  int end() const { return end_token(num_meds); }
  bool operator==(const ModelDims&) const = default;
};

// One self-attention + FFN block, each wrapped in residual + layer norm.
struct EncoderBlock {
  AttentionParams attention;
  LayerNormParams attention_norm;
  FFNParams ffn;
  LayerNormParams ffn_norm;
};

struct SetEncoderParams {
  std::vector<EncoderBlock> blocks;
};

struct DecoderParams {
  AttentionParams self_attention;
  LayerNormParams self_norm;
  AttentionParams diagnosis_attention;
  AttentionParams procedure_attention;
  LayerNormParams cross_norm;
};

struct CopyParams {
  const ad::Parameter* w_gen = nullptr;   // s x (|M|+2), generation head
  const ad::Parameter* b_gen = nullptr;   // 1 x (|M|+2)
  const ad::Parameter* w_copy = nullptr;  // s x s, medication-level query map
  const ad::Parameter* w_mix = nullptr;   // s x 1, generate-vs-copy gate
  const ad::Parameter* b_mix = nullptr;   // 1 x 1
  GateParams diagnosis_gate;
  GateParams procedure_gate;
};

// All trainable state of the recommender. Parameter names are stable and form
// the checkpoint schema.
class CognetModel {
 public:
  CognetModel(ModelConfig config, ModelDims dims, AblationFlags ablations = {});
  CognetModel(CognetModel&&) = default;
  CognetModel& operator=(CognetModel&&) = default;

  const ModelConfig& config() const { return config_; }
  const ModelDims& dims() const { return dims_; }
  const AblationFlags& ablations() const { return ablations_; }
  void set_ablations(AblationFlags flags) { ablations_ = flags; }

  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }

  // Diagnosis table |D| x s; procedure table (|P|+1) x s whose last row is the
  // NULL procedure used for empty sets; medication table (|M|+2) x s whose
  // last two rows are START and END.
  const ad::Parameter* diagnosis_embedding = nullptr;
  const ad::Parameter* procedure_embedding = nullptr;
  const ad::Parameter* medication_embedding = nullptr;

  SetEncoderParams diagnosis_encoder;
  SetEncoderParams procedure_encoder;
  SetEncoderParams medication_encoder;
  GraphEncoderParams graph;
  DecoderParams decoder;
  CopyParams copy;

  int null_procedure() const { return dims_.num_procedures; }

 private:
  ModelConfig config_;
  ModelDims dims_;
  AblationFlags ablations_;
  ad::ParameterSet params_;
};

}  // namespace cognet
