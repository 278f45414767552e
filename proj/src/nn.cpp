#include "cognet/nn.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace cognet {

using ad::Var;

void ModelConfig::validate() const {
  if (embed_dim <= 0 || heads <= 0 || gate_hidden <= 0 || max_len <= 0 || beam_width <= 0 ||
      encoder_layers <= 0) {
    throw ValidationError("model dimensions must be positive");
  }
  if (embed_dim % heads != 0) throw ValidationError("embed_dim must be divisible by heads");
  if (!(layer_norm_eps > 0.0)) throw ValidationError("layer_norm_eps must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ValidationError("dropout must lie in [0, 1)");
}

AttentionMask causal_mask(Eigen::Index length) {
  AttentionMask m(length, length);
  for (Eigen::Index i = 0; i < length; ++i) {
    for (Eigen::Index j = 0; j < length; ++j) m(i, j) = j <= i;
  }
  return m;
}

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  }
  return m;
}

AttentionParams make_attention(ad::ParameterSet& params, const std::string& prefix, int dim,
                               int heads, std::mt19937_64& rng) {
  const double b = 1.0 / std::sqrt(static_cast<double>(dim));
  AttentionParams a;
  a.wq = &params.add(prefix + ".wq", uniform_init(dim, dim, b, rng));
  a.wk = &params.add(prefix + ".wk", uniform_init(dim, dim, b, rng));
  a.wv = &params.add(prefix + ".wv", uniform_init(dim, dim, b, rng));
  a.wo = &params.add(prefix + ".wo", uniform_init(dim, dim, b, rng));
  a.heads = heads;
  return a;
}

FFNParams make_ffn(ad::ParameterSet& params, const std::string& prefix, int dim,
                   std::mt19937_64& rng) {
  const double b = 1.0 / std::sqrt(static_cast<double>(dim));
  const int hidden = kFfnExpansion * dim;
  FFNParams f;
  f.w1 = &params.add(prefix + ".w1", uniform_init(dim, hidden, b, rng));
  f.b1 = &params.add(prefix + ".b1", Matrix::Zero(1, hidden));
  f.w2 = &params.add(prefix + ".w2", uniform_init(hidden, dim, b, rng));
  f.b2 = &params.add(prefix + ".b2", Matrix::Zero(1, dim));
  return f;
}

LayerNormParams make_layer_norm(ad::ParameterSet& params, const std::string& prefix, int dim) {
  LayerNormParams ln;
  ln.gamma = &params.add(prefix + ".gamma", Matrix::Ones(1, dim));
  ln.beta = &params.add(prefix + ".beta", Matrix::Zero(1, dim));
  return ln;
}

GateParams make_gate(ad::ParameterSet& params, const std::string& prefix, int dim, int hidden,
                     std::mt19937_64& rng) {
  const double b = 1.0 / std::sqrt(static_cast<double>(dim));
  GateParams g;
  g.w1 = &params.add(prefix + ".w1", uniform_init(dim, hidden, b, rng));
  g.b1 = &params.add(prefix + ".b1", Matrix::Zero(1, hidden));
  g.w2 = &params.add(prefix + ".w2", uniform_init(hidden, 1, b, rng));
  g.b2 = &params.add(prefix + ".b2", Matrix::Zero(1, 1));
  return g;
}

namespace {

constexpr double kMaskedLogit = -1e9;

Matrix additive_mask(const AttentionMask& mask, Eigen::Index rows, Eigen::Index cols) {
  if (mask.rows() != rows || mask.cols() != cols) {
    throw std::invalid_argument("attention mask shape mismatch");
  }
  Matrix add = Matrix::Zero(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!mask.row(i).any()) throw std::invalid_argument("attention row is fully masked");
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!mask(i, j)) add(i, j) = kMaskedLogit;
    }
  }
  return add;
}

}  // namespace

Var attention_weights(Var q, Var k, const AttentionMask* mask) {
  if (q.cols() != k.cols()) throw std::invalid_argument("attention: Q and K widths differ");
  Var logits = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(q.cols())));
  if (!mask) return ad::softmax_rows(logits);
  const Matrix add = additive_mask(*mask, logits.rows(), logits.cols());
  return ad::softmax_rows(logits, &add);
}

Var attention(Var q, Var k, Var v, const AttentionMask* mask) {
  if (k.rows() != v.rows()) throw std::invalid_argument("attention: K and V row counts differ");
  return matmul(attention_weights(q, k, mask), v);
}

Var multi_head(Var q, Var k, Var v, const AttentionParams& p, const AttentionMask* mask) {
  ad::Tape& t = *q.tape;
  Var qp = matmul(q, t.param(*p.wq));
  Var kp = matmul(k, t.param(*p.wk));
  Var vp = matmul(v, t.param(*p.wv));
  const Eigen::Index width = qp.cols() / p.heads;
  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(p.heads));
  for (int h = 0; h < p.heads; ++h) {
    const Eigen::Index c0 = h * width;
    heads.push_back(attention(ad::slice_cols(qp, c0, width), ad::slice_cols(kp, c0, width),
                              ad::slice_cols(vp, c0, width), mask));
  }
  Var joined = p.heads == 1 ? heads.front() : ad::concat_cols(heads);
  return matmul(joined, t.param(*p.wo));
}

Var ffn(Var h, const FFNParams& p) {
  ad::Tape& t = *h.tape;
  Var hidden = ad::relu(ad::add_row(matmul(h, t.param(*p.w1)), t.param(*p.b1)));
  return ad::add_row(matmul(hidden, t.param(*p.w2)), t.param(*p.b2));
}

Var layer_norm_residual(Var x, Var sublayer_out, const LayerNormParams& p, double eps) {
  ad::Tape& t = *x.tape;
  return ad::layer_norm_rows(ad::add(x, sublayer_out), t.param(*p.gamma), t.param(*p.beta), eps);
}

Var gate_weights(Var x, const GateParams& p) {
  if (x.rows() < 1) throw std::invalid_argument("gated_aggregate: empty input");
  ad::Tape& t = *x.tape;
  Var hidden = ad::tanh(ad::add_row(matmul(x, t.param(*p.w1)), t.param(*p.b1)));
  Var logits = ad::add_row(matmul(hidden, t.param(*p.w2)), t.param(*p.b2));  // L x 1
  return ad::softmax_rows(ad::transpose(logits));                            // 1 x L
}

Var gated_aggregate(Var x, const GateParams& p) { return matmul(gate_weights(x, p), x); }

Var dropout(Var x, double rate, std::mt19937_64* rng) {
  if (rate <= 0.0 || rng == nullptr) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask(i) = keep(*rng) ? 1.0 / (1.0 - rate) : 0.0;
  return ad::cmul(x, x.tape->constant(std::move(mask)));
}

}  // namespace cognet
