#pragma once

#include "cognet/autodiff.hpp"

#include <random>
#include <string>

namespace cognet {

struct ModelConfig {
  int embed_dim = 64;         // s
  int heads = 4;              // h, must divide embed_dim
  int gate_hidden = 32;       // delta, hidden width of gated aggregation
  int max_len = 45;           // decoding cap in generated medications
  int beam_width = 4;
  int encoder_layers = 1;
  double layer_norm_eps = 1e-5;
  double dropout = 0.0;
  std::uint64_t init_seed = 1203;

  void validate() const;
};

// true = position may be attended.
using AttentionMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

AttentionMask causal_mask(Eigen::Index length);

// Packed per-head projections: columns [i*s/h, (i+1)*s/h) of wq/wk/wv hold
// W^Q_i, W^K_i, W^V_i.
struct AttentionParams {
  const ad::Parameter* wq = nullptr;
  const ad::Parameter* wk = nullptr;
  const ad::Parameter* wv = nullptr;
  const ad::Parameter* wo = nullptr;
  int heads = 1;
};

struct FFNParams {
  const ad::Parameter* w1 = nullptr;  // s x 8s
  const ad::Parameter* b1 = nullptr;  // 1 x 8s
  const ad::Parameter* w2 = nullptr;  // 8s x s
  const ad::Parameter* b2 = nullptr;  // 1 x s
};

struct LayerNormParams {
  const ad::Parameter* gamma = nullptr;
  const ad::Parameter* beta = nullptr;
};

struct GateParams {
  const ad::Parameter* w1 = nullptr;  // s x delta
  const ad::Parameter* b1 = nullptr;  // 1 x delta
  const ad::Parameter* w2 = nullptr;  // delta x 1
  const ad::Parameter* b2 = nullptr;  // 1 x 1
};

inline constexpr int kFfnExpansion = 8;

// Uniform(-1/sqrt(fan), 1/sqrt(fan)) with fan = embed dim for every matrix.
Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, double bound, std::mt19937_64& rng);

AttentionParams make_attention(ad::ParameterSet& params, const std::string& prefix, int dim,
                               int heads, std::mt19937_64& rng);
FFNParams make_ffn(ad::ParameterSet& params, const std::string& prefix, int dim,
                   std::mt19937_64& rng);
LayerNormParams make_layer_norm(ad::ParameterSet& params, const std::string& prefix, int dim);
GateParams make_gate(ad::ParameterSet& params, const std::string& prefix, int dim, int hidden,
                     std::mt19937_64& rng);

// Softmax(Q K^T / sqrt(d)) V with d = Q's column count. Masked logits get
// -1e9 added; a fully masked row throws std::invalid_argument.
ad::Var attention(ad::Var q, ad::Var k, ad::Var v, const AttentionMask* mask = nullptr);

// Row-stochastic attention weights only, for inspection and tests.
ad::Var attention_weights(ad::Var q, ad::Var k, const AttentionMask* mask = nullptr);

ad::Var multi_head(ad::Var q, ad::Var k, ad::Var v, const AttentionParams& p,
                   const AttentionMask* mask = nullptr);

// ReLU(H W1 + b1) W2 + b2
ad::Var ffn(ad::Var h, const FFNParams& p);

// LayerNorm(x + sublayer_out)
ad::Var layer_norm_residual(ad::Var x, ad::Var sublayer_out, const LayerNormParams& p,
                            double eps);

// Softmax over rows of tanh(X W1 + b1) W2 + b2, then weights^T X (1 x s).
ad::Var gated_aggregate(ad::Var x, const GateParams& p);
ad::Var gate_weights(ad::Var x, const GateParams& p);

// Inverted dropout; identity when rate == 0.
ad::Var dropout(ad::Var x, double rate, std::mt19937_64* rng);

}  // namespace cognet
