#include "cognet/train.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <sstream>

namespace cognet {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning rate must be finite and >= 0");
  }
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ValidationError("Adam epsilon must be positive");
  if (grad_clip < 0.0) throw ValidationError("grad_clip must be >= 0");
  if (validation_beam_width < 1) throw ValidationError("validation beam width must be >= 1");
}

std::string TrainConfig::to_json() const {
  const nlohmann::json j = {
      {"learning_rate", learning_rate},
      {"batch_size", batch_size},
      {"epochs", epochs},
      {"seed", seed},
      {"beta1", beta1},
      {"beta2", beta2},
      {"adam_eps", adam_eps},
      {"grad_clip", grad_clip},
      {"label_order", std::string(to_string(label_order))},
      {"ablations", to_string(ablations)},
      {"validation_beam_width", validation_beam_width},
  };
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  TrainConfig c;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad train config JSON: ") + e.what());
  }
  try {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    if (j.contains("label_order")) {
      c.label_order = parse_label_order(j.at("label_order").get<std::string>());
    }
    if (j.contains("ablations")) c.ablations = parse_ablations(j.at("ablations").get<std::string>());
    c.validation_beam_width = j.value("validation_beam_width", c.validation_beam_width);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad train config field: ") + e.what());
  }
  c.validate();
  return c;
}

Adam::Adam(ad::ParameterSet& params, double lr, double beta1, double beta2, double eps)
    : params_(&params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params) {
    m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }
}

void Adam::step(const std::vector<Matrix>& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_->size(); ++i) {
    if (i >= grads.size() || grads[i].size() == 0) continue;
    const Matrix& g = grads[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    const Matrix update =
        ((m_[i] / c1).array() / ((v_[i] / c2).array().sqrt() + eps_)).matrix() * lr_;
    (*params_)[i].value -= update;
  }
}

BatchGradient batch_gradient(const CognetModel& model, const GraphOperators& graphs,
                             const std::vector<PatientRecord>& patients, const Batch& batch,
                             const DropoutContext& drop) {
  ad::Tape tape;
  const ad::Var relation = relation_embeddings(tape, model, graphs);
  std::vector<ad::Var> losses;
  int tokens = 0;
  for (const auto& [p, t] : batch.samples) {
    const SequenceLoss s =
        sequence_loss(tape, model, relation, patients[static_cast<std::size_t>(p)], t, drop);
    losses.push_back(s.loss);
    tokens += s.tokens;
  }
  BatchGradient out;
  out.tokens = tokens;
  out.grads.resize(model.params().size());
  if (losses.empty()) return out;
  ad::Var total = losses.front();
  for (std::size_t i = 1; i < losses.size(); ++i) total = ad::add(total, losses[i]);
  const ad::Var mean = ad::scale(total, 1.0 / static_cast<double>(tokens));
  out.loss = mean.scalar();
  if (!std::isfinite(out.loss)) return out;
  tape.backward(mean);
  for (auto& [index, g] : tape.parameter_grads()) out.grads[static_cast<std::size_t>(index)] = g;
  return out;
}

double dataset_loss(const CognetModel& model, const GraphOperators& graphs,
                    const std::vector<PatientRecord>& patients) {
  double total = 0.0;
  int tokens = 0;
  for (std::size_t p = 0; p < patients.size(); ++p) {
    ad::Tape tape(false);
    const ad::Var relation = relation_embeddings(tape, model, graphs);
    for (std::size_t t = 0; t < patients[p].visits.size(); ++t) {
      const SequenceLoss s = sequence_loss(tape, model, relation, patients[p], static_cast<int>(t));
      total += s.loss.scalar();
      tokens += s.tokens;
    }
  }
  return tokens == 0 ? 0.0 : total / tokens;
}

namespace {

void clip_gradients(std::vector<Matrix>& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const auto& g : grads) {
    if (g.size()) sq += g.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  for (auto& g : grads) {
    if (g.size()) g *= max_norm / norm;
  }
}

}  // namespace

TrainResult train(CognetModel& model, const DatasetBundle& bundle, const MedGraphPair& graphs,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (bundle.train.empty()) throw ValidationError("training split is empty");
  model.set_ablations(config.ablations);
  const DatasetBundle data = order_medications(bundle, config.label_order);
  const GraphOperators ops = GraphOperators::from(graphs);

  std::vector<std::pair<int, int>> samples;
  for (std::size_t p = 0; p < data.train.size(); ++p) {
    for (std::size_t t = 0; t < data.train[p].visits.size(); ++t) {
      if (!data.train[p].visits[t].medications.empty()) {
        samples.emplace_back(static_cast<int>(p), static_cast<int>(t));
      }
    }
  }
  if (samples.empty()) throw ValidationError("training split has no visits with medications");

  std::mt19937_64 rng(config.seed);
  std::mt19937_64 dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  const DropoutContext drop{model.config().dropout,
                            model.config().dropout > 0.0 ? &dropout_rng : nullptr};
  Adam adam(model.params(), config.learning_rate, config.beta1, config.beta2, config.adam_eps);

  TrainResult result;
  result.best_validation_jaccard = -std::numeric_limits<double>::infinity();
  std::vector<Matrix> best = model.params().snapshot();
  const DecodeOptions val_decode{config.validation_beam_width, model.config().max_len,
                                 config.validation_beam_width == 1};

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(samples.begin(), samples.end(), rng);
    double loss_sum = 0.0;
    long long token_sum = 0;
    for (std::size_t b = 0; b < samples.size(); b += static_cast<std::size_t>(config.batch_size)) {
      Batch batch;
      const std::size_t e = std::min(samples.size(), b + static_cast<std::size_t>(config.batch_size));
      batch.samples.assign(samples.begin() + static_cast<std::ptrdiff_t>(b),
                           samples.begin() + static_cast<std::ptrdiff_t>(e));
      BatchGradient g;
      try {
        g = batch_gradient(model, ops, data.train, batch, drop);
      } catch (const std::domain_error& e) {
        // Non-finite parameters surface as degenerate distributions.
        throw DivergenceError("numerical breakdown at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      if (!std::isfinite(g.loss)) {
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(b / config.batch_size + 1));
      }
      clip_gradients(g.grads, config.grad_clip);
      adam.step(g.grads);
      loss_sum += g.loss * g.tokens;
      token_sum += g.tokens;
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(token_sum);
    if (!data.validation.empty()) {
      const InferenceSession session(model, ops);
      const auto preds = predict(session, data.validation, val_decode);
      log.has_validation = true;
      log.validation = summarize(preds, graphs.ddi, model.dims().num_meds);
      if (log.validation.jaccard > result.best_validation_jaccard) {
        result.best_validation_jaccard = log.validation.jaccard;
        result.best_epoch = epoch;
        best = model.params().snapshot();
      }
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }

  if (result.best_epoch > 0) {
    model.params().restore(best);
  } else {
    result.best_epoch = config.epochs;
    result.best_validation_jaccard = 0.0;
  }
  return result;
}

std::string metric_log_header() {
  return "epoch,train_loss,val_jaccard,val_f1,val_prauc,val_ddi,avg_drugs";
}

std::string metric_log_row(const EpochLog& e) {
  std::ostringstream os;
  os.precision(10);
  os << e.epoch << ',' << e.train_loss;
  if (e.has_validation) {
    os << ',' << e.validation.jaccard << ',' << e.validation.f1 << ',' << e.validation.prauc << ','
       << e.validation.ddi << ',' << e.validation.avg_drugs;
  } else {
    os << ",,,,,";
  }
  return os.str();
}

}  // namespace cognet
