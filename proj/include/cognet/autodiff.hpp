#pragma once

// Reverse-mode differentiation over dense matrices.
//
// A Tape records every operation of one forward pass as a node holding its
// value and a closure that pushes the node's gradient to its parents.
// Backward runs the closures in reverse recording order. Parameters live
// outside the tape in a ParameterSet; the tape copies their values in on first
// use and reports their gradients through parameter_grads(), so several tapes
// can run against the same parameters concurrently.

#include "cognet/common.hpp"

#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace cognet::ad {

struct Parameter {
  std::string name;
  Matrix value;
  int index = -1;
};

// Owns the trainable tensors. Element addresses are stable (deque), so layers
// keep plain pointers into it.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  Parameter& add(std::string name, Matrix init);
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::size_t scalar_count() const;
  std::vector<Matrix> snapshot() const;
  void restore(const std::vector<Matrix>& values);

 private:
  std::deque<Parameter> params_;
  std::unordered_map<std::string, int> index_;
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  explicit operator bool() const { return tape != nullptr; }
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  // With record_gradients = false nothing is kept for backward; use for
  // inference.
  explicit Tape(bool record_gradients = true) : record_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Differentiable leaf that is not a parameter (inputs under a gradient check).
  Var input(Matrix value);
  Var param(const Parameter& p);

  const Matrix& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }
  // Empty matrix when the node received no gradient.
  const Matrix& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }
  const Matrix& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  // Seeds d(scalar)/d(scalar) = 1 and propagates.
  void backward(Var scalar);

  // (parameter index, gradient) for every parameter that received gradient.
  std::vector<std::pair<int, Matrix>> parameter_grads() const;

  std::size_t size() const { return nodes_.size(); }
  bool recording() const { return record_; }

  Var record(Matrix value, std::initializer_list<Var> parents, Backward fn);
  Var record(Matrix value, std::span<const Var> parents, Backward fn);

  template <class Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[static_cast<std::size_t>(v.id)];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool requires_grad = false;
    const Parameter* param = nullptr;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
  bool record_;
};

// ---------------------------------------------------------------------------
// Operations. Shapes are checked; mismatches throw std::invalid_argument.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
// a (n x m) + row (1 x m) broadcast over rows.
Var add_row(Var a, Var row);
Var scale(Var a, double factor);
// a * s for a 1x1 variable s.
Var scale_by(Var a, Var s);
// Elementwise product of equal shapes.
Var cmul(Var a, Var b);
// Row i of a scaled by col(i, 0) for an (n x 1) col.
Var mul_col(Var a, Var col);
Var one_minus(Var a);
Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
// Row-wise softmax; `additive_mask`, when given, is added to the logits first.
Var softmax_rows(Var a, const Matrix* additive_mask = nullptr);
// Per-row (x - mean) / sqrt(var + eps) * gamma + beta, gamma/beta are 1 x m.
Var layer_norm_rows(Var x, Var gamma, Var beta, double eps);
Var gather_rows(Var table, std::span<const int> ids);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var transpose(Var a);
Var sum(Var a);
// Divides each row by its sum.
Var normalize_rows(Var a);
// -sum_i log a(i, targets[i]).
Var nll_rows(Var probs, std::span<const int> targets);

}  // namespace cognet::ad
