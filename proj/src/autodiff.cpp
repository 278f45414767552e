#include "cognet/autodiff.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cognet::ad {

// ---------------------------------------------------------------------------
// ParameterSet

Parameter& ParameterSet::add(std::string name, Matrix init) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
  const int idx = static_cast<int>(params_.size());
  index_.emplace(name, idx);
  params_.push_back(Parameter{std::move(name), std::move(init), idx});
  return params_.back();
}

Parameter* ParameterSet::find(std::string_view name) {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &params_[static_cast<std::size_t>(it->second)];
}

const Parameter* ParameterSet::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &params_[static_cast<std::size_t>(it->second)];
}

Parameter& ParameterSet::get(std::string_view name) {
  if (auto* p = find(name)) return *p;
  throw std::invalid_argument("no parameter named " + std::string(name));
}

const Parameter& ParameterSet::get(std::string_view name) const {
  if (const auto* p = find(name)) return *p;
  throw std::invalid_argument("no parameter named " + std::string(name));
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

std::vector<Matrix> ParameterSet::snapshot() const {
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

void ParameterSet::restore(const std::vector<Matrix>& values) {
  if (values.size() != params_.size()) throw std::invalid_argument("snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) params_[i].value = values[i];
}

// ---------------------------------------------------------------------------
// Tape

const Matrix& Var::value() const { return tape->value(*this); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::input(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = record_;
  return push(std::move(n));
}

Var Tape::param(const Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{this, it->second};
  Node n;
  n.value = p.value;
  n.requires_grad = record_;
  n.param = &p;
  Var v = push(std::move(n));
  param_nodes_.emplace(&p, v.id);
  return v;
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backward fn) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(fn));
}

Var Tape::record(Matrix value, std::span<const Var> parents, Backward fn) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (Var p : parents) {
      if (p.tape != this) throw std::invalid_argument("variable from another tape");
      if (requires_grad(p)) n.requires_grad = true;
    }
    if (n.requires_grad) n.backward = std::move(fn);
  }
  return push(std::move(n));
}

void Tape::backward(Var scalar) {
  if (!record_) throw std::logic_error("backward on a non-recording tape");
  if (scalar.value().size() != 1) throw std::invalid_argument("backward needs a 1x1 value");
  accumulate(scalar, Matrix::Ones(1, 1));
  for (int id = scalar.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.backward && n.grad.size() != 0) n.backward(*this, id);
  }
}

std::vector<std::pair<int, Matrix>> Tape::parameter_grads() const {
  std::vector<std::pair<int, Matrix>> out;
  for (const auto& [param, id] : param_nodes_) {
    const Matrix& g = nodes_[static_cast<std::size_t>(id)].grad;
    if (g.size() != 0) out.emplace_back(param->index, g);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Operations

namespace {

[[noreturn]] void shape_error(const char* op, Var a, Var b) {
  std::ostringstream ss;
  ss << op << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x"
     << b.cols();
  throw std::invalid_argument(ss.str());
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(op, a, b);
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  Matrix v = a.value() * b.value();
  return a.tape->record(std::move(v), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Matrix v = a.value() + b.value();
  return a.tape->record(std::move(v), {a, b}, [a, b](Tape& t, int self) {
    t.accumulate(a, t.grad(self));
    t.accumulate(b, t.grad(self));
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Matrix v = a.value() - b.value();
  return a.tape->record(std::move(v), {a, b}, [a, b](Tape& t, int self) {
    t.accumulate(a, t.grad(self));
    t.accumulate(b, -t.grad(self));
  });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) shape_error("add_row", a, row);
  Matrix v = a.value().rowwise() + row.value().row(0);
  return a.tape->record(std::move(v), {a, row}, [a, row](Tape& t, int self) {
    t.accumulate(a, t.grad(self));
    t.accumulate(row, t.grad(self).colwise().sum());
  });
}

Var scale(Var a, double factor) {
  Matrix v = a.value() * factor;
  return a.tape->record(std::move(v), {a}, [a, factor](Tape& t, int self) {
    t.accumulate(a, t.grad(self) * factor);
  });
}

Var scale_by(Var a, Var s) {
  if (s.rows() != 1 || s.cols() != 1) shape_error("scale_by", a, s);
  Matrix v = a.value() * s.scalar();
  return a.tape->record(std::move(v), {a, s}, [a, s](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(s)(0, 0));
    if (t.requires_grad(s)) {
      t.accumulate(s, Matrix::Constant(1, 1, g.cwiseProduct(t.value(a)).sum()));
    }
  });
}

Var cmul(Var a, Var b) {
  require_same_shape("cmul", a, b);
  Matrix v = a.value().cwiseProduct(b.value());
  return a.tape->record(std::move(v), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
    if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
  });
}

Var mul_col(Var a, Var col) {
  if (col.cols() != 1 || col.rows() != a.rows()) shape_error("mul_col", a, col);
  Matrix v = col.value().col(0).asDiagonal() * a.value();
  return a.tape->record(std::move(v), {a, col}, [a, col](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a)) t.accumulate(a, t.value(col).col(0).asDiagonal() * g);
    if (t.requires_grad(col)) t.accumulate(col, g.cwiseProduct(t.value(a)).rowwise().sum());
  });
}

Var one_minus(Var a) {
  Matrix v = (1.0 - a.value().array()).matrix();
  return a.tape->record(std::move(v), {a}, [a](Tape& t, int self) {
    t.accumulate(a, -t.grad(self));
  });
}

Var relu(Var a) {
  Matrix v = a.value().cwiseMax(0.0);
  return a.tape->record(std::move(v), {a}, [a](Tape& t, int self) {
    t.accumulate(a, (t.value(a).array() > 0.0).cast<double>().matrix().cwiseProduct(t.grad(self)));
  });
}

Var tanh(Var a) {
  Matrix v = a.value().array().tanh().matrix();
  return a.tape->record(std::move(v), {a}, [a](Tape& t, int self) {
    const auto y = t.value(self).array();
    t.accumulate(a, ((1.0 - y.square()) * t.grad(self).array()).matrix());
  });
}

Var sigmoid(Var a) {
  Matrix v = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return a.tape->record(std::move(v), {a}, [a](Tape& t, int self) {
    const auto y = t.value(self).array();
    t.accumulate(a, (y * (1.0 - y) * t.grad(self).array()).matrix());
  });
}

Var softmax_rows(Var a, const Matrix* additive_mask) {
  Matrix logits = a.value();
  if (additive_mask) {
    if (additive_mask->rows() != logits.rows() || additive_mask->cols() != logits.cols()) {
      throw std::invalid_argument("softmax_rows: mask shape mismatch");
    }
    logits += *additive_mask;
  }
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
  return a.tape->record(std::move(logits), {a}, [a](Tape& t, int self) {
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    t.accumulate(a, y.cwiseProduct(g - dot.replicate(1, g.cols())));
  });
}

Var layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
  const Eigen::Index n = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != n) shape_error("layer_norm gamma", x, gamma);
  if (beta.rows() != 1 || beta.cols() != n) shape_error("layer_norm beta", x, beta);
  const Matrix& xv = x.value();
  Matrix xhat(xv.rows(), n);
  Eigen::VectorXd inv_std(xv.rows());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    const double mean = xv.row(i).mean();
    const double var = (xv.row(i).array() - mean).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (xv.row(i).array() - mean) * inv_std(i);
  }
  Matrix y = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
  y.rowwise() += beta.value().row(0);
  return x.tape->record(
      std::move(y), {x, gamma, beta},
      [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(gamma)) t.accumulate(gamma, g.cwiseProduct(xhat).colwise().sum());
        if (t.requires_grad(beta)) t.accumulate(beta, g.colwise().sum());
        if (t.requires_grad(x)) {
          const Matrix dxhat = (g.array().rowwise() * t.value(gamma).row(0).array()).matrix();
          Matrix dx(g.rows(), g.cols());
          for (Eigen::Index i = 0; i < g.rows(); ++i) {
            const double m1 = dxhat.row(i).mean();
            const double m2 = dxhat.row(i).cwiseProduct(xhat.row(i)).mean();
            dx.row(i) = inv_std(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
          }
          t.accumulate(x, dx);
        }
      });
}

Var gather_rows(Var table, std::span<const int> ids) {
  const Matrix& tv = table.value();
  Matrix v(static_cast<Eigen::Index>(ids.size()), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= tv.rows()) {
      throw std::out_of_range("gather_rows: id " + std::to_string(ids[i]) + " outside table of " +
                              std::to_string(tv.rows()) + " rows");
    }
    v.row(static_cast<Eigen::Index>(i)) = tv.row(ids[i]);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return table.tape->record(std::move(v), {table}, [table, idx = std::move(idx)](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix dt = Matrix::Zero(t.value(table).rows(), t.value(table).cols());
    for (std::size_t i = 0; i < idx.size(); ++i) dt.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    t.accumulate(table, dt);
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().cols();
  for (Var p : parts) {
    if (p.cols() != cols) shape_error("concat_rows", parts.front(), p);
    rows += p.rows();
  }
  Matrix v(rows, cols);
  Eigen::Index r = 0;
  for (Var p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return parts.front().tape->record(std::move(v), parts, [ps](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Eigen::Index r0 = 0;
    for (Var p : ps) {
      const Eigen::Index n = t.value(p).rows();
      if (t.requires_grad(p)) t.accumulate(p, g.middleRows(r0, n));
      r0 += n;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts.front().rows();
  for (Var p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", parts.front(), p);
    cols += p.cols();
  }
  Matrix v(rows, cols);
  Eigen::Index c = 0;
  for (Var p : parts) {
    v.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return parts.front().tape->record(std::move(v), parts, [ps](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Eigen::Index c0 = 0;
    for (Var p : ps) {
      const Eigen::Index n = t.value(p).cols();
      if (t.requires_grad(p)) t.accumulate(p, g.middleCols(c0, n));
      c0 += n;
    }
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw std::invalid_argument("slice_rows: range outside matrix");
  }
  Matrix v = a.value().middleRows(start, count);
  return a.tape->record(std::move(v), {a}, [a, start, count](Tape& t, int self) {
    Matrix g = Matrix::Zero(t.value(a).rows(), t.value(a).cols());
    g.middleRows(start, count) = t.grad(self);
    t.accumulate(a, g);
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw std::invalid_argument("slice_cols: range outside matrix");
  }
  Matrix v = a.value().middleCols(start, count);
  return a.tape->record(std::move(v), {a}, [a, start, count](Tape& t, int self) {
    Matrix g = Matrix::Zero(t.value(a).rows(), t.value(a).cols());
    g.middleCols(start, count) = t.grad(self);
    t.accumulate(a, g);
  });
}

Var transpose(Var a) {
  Matrix v = a.value().transpose();
  return a.tape->record(std::move(v), {a}, [a](Tape& t, int self) {
    t.accumulate(a, t.grad(self).transpose());
  });
}

Var sum(Var a) {
  Matrix v = Matrix::Constant(1, 1, a.value().sum());
  return a.tape->record(std::move(v), {a}, [a](Tape& t, int self) {
    t.accumulate(a, Matrix::Constant(t.value(a).rows(), t.value(a).cols(), t.grad(self)(0, 0)));
  });
}

Var normalize_rows(Var a) {
  const Eigen::VectorXd sums = a.value().rowwise().sum();
  for (Eigen::Index i = 0; i < sums.size(); ++i) {
    if (!(sums(i) > 0.0)) throw std::domain_error("normalize_rows: non-positive row sum");
  }
  Matrix v = sums.cwiseInverse().asDiagonal() * a.value();
  return a.tape->record(std::move(v), {a}, [a, sums](Tape& t, int self) {
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    t.accumulate(a, sums.cwiseInverse().asDiagonal() * (g - dot.replicate(1, g.cols())));
  });
}

Var nll_rows(Var probs, std::span<const int> targets) {
  const Matrix& p = probs.value();
  if (static_cast<Eigen::Index>(targets.size()) != p.rows()) {
    throw std::invalid_argument("nll_rows: one target per row required");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0 || targets[i] >= p.cols()) throw std::out_of_range("nll_rows: target id");
    loss -= std::log(p(static_cast<Eigen::Index>(i), targets[i]));
  }
  std::vector<int> tg(targets.begin(), targets.end());
  return probs.tape->record(Matrix::Constant(1, 1, loss), {probs},
                            [probs, tg = std::move(tg)](Tape& t, int self) {
                              const double g = t.grad(self)(0, 0);
                              const Matrix& pv = t.value(probs);
                              Matrix d = Matrix::Zero(pv.rows(), pv.cols());
                              for (std::size_t i = 0; i < tg.size(); ++i) {
                                const auto r = static_cast<Eigen::Index>(i);
                                d(r, tg[i]) = -g / pv(r, tg[i]);
                              }
                              t.accumulate(probs, d);
                            });
}

}  // namespace cognet::ad
