#include "cognet/model.hpp"

#include <cmath>
#include <sstream>

namespace cognet {

AblationFlags parse_ablations(std::string_view list) {
  AblationFlags f;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const auto comma = list.find(',', pos);
    std::string_view item = list.substr(pos, comma == std::string_view::npos ? std::string_view::npos
                                                                             : comma - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (item == "copy") {
      f.no_copy = true;
    } else if (item == "visit_scores") {
      f.no_visit_scores = true;
    } else if (item == "graphs") {
      f.no_graphs = true;
    } else if (item == "diagnoses") {
      f.no_diagnoses = true;
    } else if (item == "procedures") {
      f.no_procedures = true;
    } else if (!item.empty()) {
      throw ValidationError("unknown ablation '" + std::string(item) + "'");
    }
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return f;
}

std::string to_string(const AblationFlags& flags) {
  std::string out;
  auto add = [&out](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(flags.no_copy, "copy");
  add(flags.no_visit_scores, "visit_scores");
  add(flags.no_graphs, "graphs");
  add(flags.no_diagnoses, "diagnoses");
  add(flags.no_procedures, "procedures");
  return out;
}

namespace {

SetEncoderParams make_set_encoder(ad::ParameterSet& params, const std::string& prefix,
                                  const ModelConfig& cfg, std::mt19937_64& rng) {
  SetEncoderParams enc;
  for (int layer = 0; layer < cfg.encoder_layers; ++layer) {
    const std::string p = prefix + "." + std::to_string(layer);
    EncoderBlock b;
    b.attention = make_attention(params, p + ".attn", cfg.embed_dim, cfg.heads, rng);
    b.attention_norm = make_layer_norm(params, p + ".attn_norm", cfg.embed_dim);
    b.ffn = make_ffn(params, p + ".ffn", cfg.embed_dim, rng);
    b.ffn_norm = make_layer_norm(params, p + ".ffn_norm", cfg.embed_dim);
    enc.blocks.push_back(b);
  }
  return enc;
}

}  // namespace

CognetModel::CognetModel(ModelConfig config, ModelDims dims, AblationFlags ablations)
    : config_(config), dims_(dims), ablations_(ablations) {
  config_.validate();
  if (dims_.num_diagnoses < 1 || dims_.num_procedures < 0 || dims_.num_meds < 1) {
    throw ValidationError("model vocabulary sizes must be positive");
  }
  std::mt19937_64 rng(config_.init_seed);
  const int s = config_.embed_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(s));

  diagnosis_embedding =
      &params_.add("embedding.diagnosis", uniform_init(dims_.num_diagnoses, s, bound, rng));
  procedure_embedding =
      &params_.add("embedding.procedure", uniform_init(dims_.num_procedures + 1, s, bound, rng));
  medication_embedding =
      &params_.add("embedding.medication", uniform_init(dims_.decoder_vocab(), s, bound, rng));

  diagnosis_encoder = make_set_encoder(params_, "encoder.diagnosis", config_, rng);
  procedure_encoder = make_set_encoder(params_, "encoder.procedure", config_, rng);
  medication_encoder = make_set_encoder(params_, "encoder.medication", config_, rng);

  graph = make_graph_encoder(params_, s, rng);

  decoder.self_attention = make_attention(params_, "decoder.self_attn", s, config_.heads, rng);
  decoder.self_norm = make_layer_norm(params_, "decoder.self_norm", s);
  decoder.diagnosis_attention = make_attention(params_, "decoder.diag_attn", s, config_.heads, rng);
  decoder.procedure_attention = make_attention(params_, "decoder.proc_attn", s, config_.heads, rng);
  decoder.cross_norm = make_layer_norm(params_, "decoder.cross_norm", s);

  copy.w_gen = &params_.add("output.w_gen", uniform_init(s, dims_.decoder_vocab(), bound, rng));
  copy.b_gen = &params_.add("output.b_gen", Matrix::Zero(1, dims_.decoder_vocab()));
  copy.w_copy = &params_.add("copy.w_copy", uniform_init(s, s, bound, rng));
  copy.w_mix = &params_.add("copy.w_mix", uniform_init(s, 1, bound, rng));
  copy.b_mix = &params_.add("copy.b_mix", Matrix::Zero(1, 1));
  copy.diagnosis_gate = make_gate(params_, "copy.diag_gate", s, config_.gate_hidden, rng);
  copy.procedure_gate = make_gate(params_, "copy.proc_gate", s, config_.gate_hidden, rng);
}

}  // namespace cognet
