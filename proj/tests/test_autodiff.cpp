#include "cognet/autodiff.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

using namespace cognet;
using namespace cognet::ad;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo = -1.0,
                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = u(rng);
  return m;
}

// f maps input Vars to a scalar Var. Reduction to a scalar uses a fixed random
// weighting so every output element contributes.
double max_fd_error(const std::vector<Matrix>& inputs,
                    const std::function<Var(Tape&, const std::vector<Var>&)>& f) {
  auto eval = [&](const std::vector<Matrix>& xs, Tape& tape, std::vector<Var>& vars) {
    vars.clear();
    for (const auto& x : xs) vars.push_back(tape.input(x));
    return f(tape, vars);
  };
  Tape tape;
  std::vector<Var> vars;
  Var out = eval(inputs, tape, vars);
  tape.backward(out);
  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Matrix g = tape.grad(vars[i]);
    if (g.size() == 0) g = Matrix::Zero(inputs[i].rows(), inputs[i].cols());
    for (Eigen::Index k = 0; k < inputs[i].size(); ++k) {
      auto xs = inputs;
      xs[i](k) += h;
      Tape t1;
      std::vector<Var> v1;
      const double up = eval(xs, t1, v1).scalar();
      xs[i](k) -= 2 * h;
      Tape t2;
      std::vector<Var> v2;
      const double down = eval(xs, t2, v2).scalar();
      const double num = (up - down) / (2 * h);
      const double denom = std::max({std::abs(num), std::abs(g(k)), 1e-6});
      worst = std::max(worst, std::abs(num - g(k)) / denom);
    }
  }
  return worst;
}

Var weighted_sum(Tape& tape, Var x, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  return sum(cmul(x, tape.constant(random_matrix(rng, x.rows(), x.cols()))));
}

class AutodiffGrad : public ::testing::Test {
 protected:
  std::mt19937_64 rng{17};
};

}  // namespace

TEST_F(AutodiffGrad, Matmul) {
  EXPECT_LT(max_fd_error({random_matrix(rng, 3, 4), random_matrix(rng, 4, 2)},
                         [](Tape& t, const std::vector<Var>& v) { return weighted_sum(t, matmul(v[0], v[1])); }),
            1e-4);
}

TEST_F(AutodiffGrad, AddSubAddRowScale) {
  EXPECT_LT(max_fd_error({random_matrix(rng, 3, 4), random_matrix(rng, 3, 4), random_matrix(rng, 1, 4)},
                         [](Tape& t, const std::vector<Var>& v) {
                           return weighted_sum(t, scale(add_row(sub(add(v[0], v[1]), v[1]), v[2]), -1.7));
                         }),
            1e-4);
}

TEST_F(AutodiffGrad, ScaleByCmulMulColOneMinus) {
  EXPECT_LT(max_fd_error({random_matrix(rng, 3, 4), random_matrix(rng, 1, 1), random_matrix(rng, 3, 4),
                          random_matrix(rng, 3, 1)},
                         [](Tape& t, const std::vector<Var>& v) {
                           return weighted_sum(t, mul_col(cmul(scale_by(v[0], v[1]), one_minus(v[2])), v[3]));
                         }),
            1e-4);
}

TEST_F(AutodiffGrad, Activations) {
  EXPECT_LT(max_fd_error({random_matrix(rng, 4, 5)},
                         [](Tape& t, const std::vector<Var>& v) {
                           return weighted_sum(t, add(add(relu(v[0]), ad::tanh(v[0])), sigmoid(v[0])));
                         }),
            1e-4);
}

TEST_F(AutodiffGrad, SoftmaxWithMask) {
  Matrix mask = Matrix::Zero(3, 4);
  mask(0, 1) = -1e9;
  mask(2, 3) = -1e9;
  EXPECT_LT(max_fd_error({random_matrix(rng, 3, 4, -2, 2)},
                         [&](Tape& t, const std::vector<Var>& v) {
                           return weighted_sum(t, softmax_rows(v[0], &mask));
                         }),
            1e-4);
}

TEST_F(AutodiffGrad, LayerNorm) {
  EXPECT_LT(max_fd_error({random_matrix(rng, 3, 6), random_matrix(rng, 1, 6), random_matrix(rng, 1, 6)},
                         [](Tape& t, const std::vector<Var>& v) {
                           return weighted_sum(t, layer_norm_rows(v[0], v[1], v[2], 1e-5));
                         }),
            1e-4);
}

TEST_F(AutodiffGrad, GatherConcatSliceTranspose) {
  const int ids[] = {2, 0, 2, 1};
  EXPECT_LT(max_fd_error({random_matrix(rng, 3, 4), random_matrix(rng, 2, 4)},
                         [&](Tape& t, const std::vector<Var>& v) {
                           Var g = gather_rows(v[0], ids);
                           const Var rows[] = {g, v[1]};
                           Var c = concat_rows(rows);
                           const Var cols[] = {slice_cols(c, 1, 2), slice_cols(c, 0, 1)};
                           Var cc = concat_cols(cols);
                           return weighted_sum(t, transpose(slice_rows(cc, 1, 4)));
                         }),
            1e-4);
}

TEST_F(AutodiffGrad, NormalizeAndNll) {
  const int targets[] = {1, 0, 3};
  EXPECT_LT(max_fd_error({random_matrix(rng, 3, 4, 0.1, 1.0)},
                         [&](Tape&, const std::vector<Var>& v) {
                           return nll_rows(normalize_rows(v[0]), targets);
                         }),
            1e-4);
}

TEST(Autodiff, ParameterGradientsAccumulateAcrossUses) {
  ParameterSet ps;
  Parameter& w = ps.add("w", Matrix::Constant(1, 1, 3.0));
  Tape tape;
  Var a = tape.param(w);
  Var b = tape.param(w);  // cached node
  EXPECT_EQ(a.id, b.id);
  Var y = cmul(a, b);
  tape.backward(y);
  const auto grads = tape.parameter_grads();
  ASSERT_EQ(grads.size(), 1u);
  EXPECT_DOUBLE_EQ(grads[0].second(0, 0), 6.0);
}

TEST(Autodiff, ConstantsReceiveNoGradient) {
  Tape tape;
  Var c = tape.constant(Matrix::Ones(2, 2));
  Var x = tape.input(Matrix::Ones(2, 2));
  tape.backward(sum(cmul(c, x)));
  EXPECT_FALSE(tape.requires_grad(c));
  EXPECT_EQ(tape.grad(x), Matrix::Ones(2, 2));
}

TEST(Autodiff, ShapeMismatchThrows) {
  Tape tape;
  Var a = tape.constant(Matrix::Ones(2, 3));
  Var b = tape.constant(Matrix::Ones(2, 3));
  EXPECT_THROW(matmul(a, b), std::invalid_argument);
  EXPECT_THROW(add(a, tape.constant(Matrix::Ones(3, 2))), std::invalid_argument);
}

TEST(Autodiff, SnapshotRestoreIsExact) {
  ParameterSet ps;
  ps.add("a", Matrix::Constant(2, 2, 0.1));
  const auto snap = ps.snapshot();
  ps[0].value(0, 0) = 5.0;
  ps.restore(snap);
  EXPECT_EQ(ps[0].value, Matrix::Constant(2, 2, 0.1));
  EXPECT_EQ(ps.scalar_count(), 4u);
  EXPECT_THROW(ps.add("a", Matrix::Zero(1, 1)), std::exception);
}
