#include "oracles.hpp"
#include "rapnet/grad_check.hpp"
#include "rapnet/tensor.hpp"

#include <gtest/gtest.h>

#include <functional>

using namespace rapnet;

namespace {

Parameter make_param(const std::string& name, const MatrixXd& v) {
  Parameter p(name, v.rows(), v.cols());
  p.value = v;
  return p;
}

/// Weighted sum so every output entry gets a distinct adjoint.
Var weighted_sum(Tape& t, const Var& y, const MatrixXd& w) { return sum(mul(y, t.constant(w))); }

void expect_grad_ok(const std::function<Var(Tape&)>& f, std::vector<Parameter*> params, double tol = 1e-7) {
  auto rep = grad_check(f, params, 1e-5);
  EXPECT_TRUE(rep.passed(tol)) << "worst " << rep.worst_parameter << "[" << rep.worst_index
                               << "] rel " << rep.max_relative_error << " analytic " << rep.worst_analytic
                               << " numeric " << rep.worst_numeric;
}

}  // namespace

TEST(Tape, MatmulMatchesTripleLoop) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    Index m = 1 + trial % 4, k = 1 + trial % 5, n = 1 + trial % 3;
    MatrixXd a = oracle::random_matrix(rng, m, k), b = oracle::random_matrix(rng, k, n);
    Tape t;
    EXPECT_LT(oracle::max_abs_diff(matmul(t.constant(a), t.constant(b)).value(), oracle::matmul(a, b)), 1e-12);
    EXPECT_LT(oracle::max_abs_diff(matmul_nt(t.constant(a), t.constant(oracle::transpose(b))).value(),
                                   oracle::matmul(a, b)),
              1e-12);
  }
}

TEST(Tape, SoftmaxMatchesFormula) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    MatrixXd a = oracle::random_matrix(rng, 1 + trial % 3, 1 + trial % 7, 5.0);
    Tape t;
    auto y = softmax_rows(t.constant(a)).value();
    EXPECT_LT(oracle::max_abs_diff(y, oracle::softmax_rows(a)), 1e-10);
    for (Index r = 0; r < y.rows(); ++r) EXPECT_NEAR(y.row(r).sum(), 1.0, 1e-12);
  }
}

TEST(Tape, SoftmaxSurvivesLargeLogits) {
  Tape t;
  MatrixXd a(1, 3);
  a << 1000.0, 1001.0, 999.0;
  auto y = softmax(t.constant(a)).value();
  EXPECT_TRUE(y.allFinite());
  EXPECT_NEAR(y.sum(), 1.0, 1e-12);
  EXPECT_GT(y(0, 1), y(0, 0));
}

TEST(Tape, SigmoidIsStableAtExtremes) {
  Tape t;
  MatrixXd a(1, 4);
  a << -800.0, -30.0, 30.0, 800.0;
  auto y = sigmoid(t.constant(a)).value();
  EXPECT_TRUE(y.allFinite());
  EXPECT_EQ(y(0, 0), 0.0);
  EXPECT_EQ(y(0, 3), 1.0);
  EXPECT_NEAR(y(0, 1), oracle::sigmoid(-30.0), 1e-25);
}

TEST(Tape, QuadraticGradientIsExact) {
  // L = sum(x*x) => dL/dx = 2x
  std::mt19937_64 rng(1);
  auto x = make_param("x", oracle::random_matrix(rng, 3, 2));
  x.zero_grad();
  Tape t;
  auto v = t.parameter(x);
  t.backward(sum(mul(v, v)));
  EXPECT_LT(oracle::max_abs_diff(x.grad, 2.0 * x.value), 1e-15);

  std::vector<Parameter*> ps{&x};
  auto rep = grad_check([&](Tape& tt) { auto p = tt.parameter(x); return sum(mul(p, p)); }, ps, 1e-5);
  EXPECT_LT(rep.max_relative_error, 1e-9);
}

TEST(Tape, GradientsAccumulateAcrossUses) {
  Parameter x("x", 1, 1);
  x.value(0, 0) = 3.0;
  x.zero_grad();
  Tape t;
  auto v = t.parameter(x);
  EXPECT_EQ(t.parameter(x).id(), v.id());
  t.backward(sum(add(mul(v, v), scale(v, 4.0))));  // x^2 + 4x
  EXPECT_DOUBLE_EQ(x.grad(0, 0), 10.0);
}

TEST(Tape, ConstantsReceiveNoBackwardWork) {
  Tape t;
  auto c = t.constant(MatrixXd::Ones(2, 2));
  auto y = mul(c, c);
  EXPECT_FALSE(y.requires_grad());
  EXPECT_THROW(t.backward(c), ShapeError);
  t.backward(sum(y));  // no parameter reached: a no-op apart from the seed
}

TEST(Tape, BackwardRejectsNonScalarLoss) {
  Parameter x("x", 2, 2);
  Tape t;
  EXPECT_THROW(t.backward(t.parameter(x)), ShapeError);
}

TEST(Tape, ShapeErrorsNameTheOperation) {
  Tape t;
  auto a = t.zeros(2, 3), b = t.zeros(2, 2);
  EXPECT_THROW(matmul(a, b), ShapeError);
  EXPECT_THROW(add(a, b), ShapeError);
  EXPECT_THROW(concat_rows({a, b}), ShapeError);
  EXPECT_THROW(slice_cols(a, 2, 2), ShapeError);
  EXPECT_THROW(softmax(t.zeros(2, 2)), ShapeError);
  std::vector<int> bad{5};
  EXPECT_THROW(gather_rows(a, bad), ShapeError);
  try {
    matmul(a, b);
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos);
  }
}

TEST(Tape, MixingTapesIsRejected) {
  Tape t1, t2;
  EXPECT_THROW(add(t1.zeros(1, 1), t2.zeros(1, 1)), std::invalid_argument);
}

TEST(Tape, ElementwiseAndStructuralGradients) {
  std::mt19937_64 rng(5);
  auto a = make_param("a", oracle::random_matrix(rng, 3, 4));
  auto b = make_param("b", oracle::random_matrix(rng, 3, 4));
  auto row = make_param("row", oracle::random_matrix(rng, 1, 4));
  MatrixXd w33 = oracle::random_matrix(rng, 3, 3), w34 = oracle::random_matrix(rng, 3, 4), w38 = oracle::random_matrix(rng, 3, 8),
           w64 = oracle::random_matrix(rng, 6, 4), w14 = oracle::random_matrix(rng, 1, 4),
           w31 = oracle::random_matrix(rng, 3, 1), w44 = oracle::random_matrix(rng, 4, 4),
           w43 = oracle::random_matrix(rng, 4, 3);
  std::vector<Parameter*> ps{&a, &b, &row};
  using F = std::function<Var(Tape&)>;
  auto A = [&](Tape& t) { return t.parameter(a); };
  auto B = [&](Tape& t) { return t.parameter(b); };
  std::vector<std::pair<const char*, F>> cases = {
      {"add", [&](Tape& t) { return weighted_sum(t, add(A(t), B(t)), w34); }},
      {"sub", [&](Tape& t) { return weighted_sum(t, sub(A(t), B(t)), w34); }},
      {"mul", [&](Tape& t) { return weighted_sum(t, mul(A(t), B(t)), w34); }},
      {"scale", [&](Tape& t) { return weighted_sum(t, scale(A(t), -1.5), w34); }},
      {"add_row", [&](Tape& t) { return weighted_sum(t, add_row(A(t), t.parameter(row)), w34); }},
      {"sigmoid", [&](Tape& t) { return weighted_sum(t, sigmoid(A(t)), w34); }},
      {"tanh", [&](Tape& t) { return weighted_sum(t, tanh(A(t)), w34); }},
      {"softmax_rows", [&](Tape& t) { return weighted_sum(t, softmax_rows(A(t)), w34); }},
      {"transpose", [&](Tape& t) { return weighted_sum(t, transpose(A(t)), w43); }},
      {"matmul", [&](Tape& t) { return weighted_sum(t, matmul(transpose(A(t)), B(t)), w44); }},
      {"matmul_nt", [&](Tape& t) { return weighted_sum(t, matmul_nt(A(t), B(t)), w33); }},
      {"max_over_positions", [&](Tape& t) { return weighted_sum(t, max_over_positions(A(t)), w14); }},
      {"mean_over_positions", [&](Tape& t) { return weighted_sum(t, mean_over_positions(A(t)), w14); }},
      {"max_over", [&](Tape& t) { return weighted_sum(t, max_over(std::vector<Var>{A(t), B(t)}), w34); }},
      {"row_sum", [&](Tape& t) { return weighted_sum(t, row_sum(A(t)), w31); }},
      {"concat_cols", [&](Tape& t) { return weighted_sum(t, concat_cols({A(t), B(t)}), w38); }},
      {"concat_rows", [&](Tape& t) { return weighted_sum(t, concat_rows({A(t), B(t)}), w64); }},
      {"slice", [&](Tape& t) { return weighted_sum(t, slice_rows(slice_cols(A(t), 1, 2), 1, 2), w34.block(0, 0, 2, 2)); }},
      {"repeat_rows", [&](Tape& t) { return weighted_sum(t, repeat_rows(t.parameter(row), 3), w34); }},
      {"gather_rows",
       [&](Tape& t) {
         std::vector<int> ids{2, 0, 2};
         return weighted_sum(t, gather_rows(A(t), ids), w34);
       }},
      {"stack_time_major",
       [&](Tape& t) { return weighted_sum(t, stack_time_major(std::span<const Var>(std::vector<Var>{A(t), B(t)})), w64); }},
      {"bce",
       [&](Tape& t) {
         std::vector<int> y{1, 0, 1};
         return binary_cross_entropy(sigmoid(slice_cols(A(t), 0, 1)), y);
       }},
  };
  for (auto& [name, f] : cases) {
    SCOPED_TRACE(name);
    expect_grad_ok(f, ps);
  }
}

TEST(Tape, ReluGradientIsZeroAtZero) {
  Parameter x("x", 1, 3);
  x.value << -1.0, 0.0, 2.0;
  x.zero_grad();
  Tape t;
  t.backward(sum(relu(t.parameter(x))));
  EXPECT_EQ(x.grad(0, 0), 0.0);
  EXPECT_EQ(x.grad(0, 1), 0.0);
  EXPECT_EQ(x.grad(0, 2), 1.0);
}

TEST(Tape, MaxTiesRouteToFirstPosition) {
  Parameter x("x", 3, 1);
  x.value << 2.0, 2.0, 1.0;
  x.zero_grad();
  Tape t;
  t.backward(sum(max_over_positions(t.parameter(x))));
  EXPECT_EQ(x.grad(0, 0), 1.0);
  EXPECT_EQ(x.grad(1, 0), 0.0);
}

TEST(Tape, StackTimeMajorInterleaves) {
  Tape t;
  MatrixXd a(2, 1), b(2, 1);
  a << 1, 2;
  b << 10, 20;
  auto s = stack_time_major(std::span<const Var>(std::vector<Var>{t.constant(a), t.constant(b)})).value();
  ASSERT_EQ(s.rows(), 4);
  EXPECT_EQ(s(0, 0), 1);
  EXPECT_EQ(s(1, 0), 10);
  EXPECT_EQ(s(2, 0), 2);
  EXPECT_EQ(s(3, 0), 20);
}

TEST(Tape, BinaryCrossEntropyValueAndLabels) {
  Tape t;
  MatrixXd p(2, 1);
  p << 0.8, 0.25;
  std::vector<int> y{1, 0};
  EXPECT_NEAR(binary_cross_entropy(t.constant(p), y).item(), -std::log(0.8) - std::log(0.75), 1e-15);
  std::vector<int> bad{1, 2};
  EXPECT_THROW(binary_cross_entropy(t.constant(p), bad), std::invalid_argument);
  std::vector<int> short_labels{1};
  EXPECT_THROW(binary_cross_entropy(t.constant(p), short_labels), ShapeError);
  MatrixXd sure(1, 1);
  sure << 0.0;
  std::vector<int> one{1};
  EXPECT_TRUE(std::isfinite(binary_cross_entropy(t.constant(sure), one).item()));
}

TEST(GradCheck, DetectsAWrongGradient) {
  // A deliberately broken op: forward x^2, backward claims 3x.
  Parameter x("x", 1, 2);
  x.value << 0.7, -1.3;
  std::vector<Parameter*> ps{&x};
  auto broken = [&](Tape& t) {
    auto v = t.parameter(x);
    MatrixXd val = v.value().cwiseAbs2();
    int id = v.id();
    auto y = t.record(val, {id}, [id](Tape& tt, int self) {
      tt.grad(id).array() += 3.0 * tt.value(id).array() * tt.grad(self).array();
    });
    return sum(y);
  };
  auto rep = grad_check(broken, ps, 1e-5);
  EXPECT_FALSE(rep.passed(1e-4));
  EXPECT_EQ(rep.worst_parameter, "x");
  EXPECT_NEAR(rep.max_relative_error, 1.0 / 3.0, 1e-6);
}
