#include "bridgecat/autodiff.hpp"

#include "bridgecat/random.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>

using namespace bridgecat;
using bridgecat::ad::Tape;
using bridgecat::ad::Var;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

/// Central finite differences of a scalar function of one leaf matrix.
void check_gradients(const std::function<double(const Eigen::MatrixXd&, Eigen::MatrixXd*)>& f,
                     const Eigen::MatrixXd& at, double h = 1e-6, double tol = 1e-6) {
  Eigen::MatrixXd analytic;
  f(at, &analytic);
  for (Eigen::Index i = 0; i < at.rows(); ++i) {
    for (Eigen::Index j = 0; j < at.cols(); ++j) {
      Eigen::MatrixXd plus = at, minus = at;
      plus(i, j) += h;
      minus(i, j) -= h;
      double numeric = (f(plus, nullptr) - f(minus, nullptr)) / (2.0 * h);
      CHECK(analytic(i, j) == doctest::Approx(numeric).epsilon(tol).scale(1.0));
    }
  }
}

} // namespace

TEST_CASE("matmul, add, mul, scale gradients match finite differences") {
  Rng rng(1);
  Eigen::MatrixXd a0 = random_matrix(rng, 3, 4);
  Eigen::MatrixXd b = random_matrix(rng, 4, 2);
  Eigen::MatrixXd target = random_matrix(rng, 3, 2);
  Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(3, 2);

  auto f = [&](const Eigen::MatrixXd& a, Eigen::MatrixXd* grad) {
    Tape tape;
    Var va = tape.leaf(a);
    Var vb = tape.constant(b);
    Var prod = tape.matmul(va, vb);
    Var scaled = tape.scale(prod, 1.7);
    Var squared = tape.mul(scaled, scaled);
    Var loss = tape.mse_masked(tape.add(squared, scaled), target, mask);
    if (grad != nullptr) {
      tape.backward(loss);
      *grad = tape.grad(va);
    }
    return tape.value(loss)(0, 0);
  };
  check_gradients(f, a0);
}

TEST_CASE("silu, sigmoid, sqrt_shifted gradients match finite differences") {
  Rng rng(2);
  Eigen::MatrixXd x0 = random_matrix(rng, 2, 5);
  Eigen::MatrixXd target = random_matrix(rng, 2, 5);
  Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(2, 5);

  auto f = [&](const Eigen::MatrixXd& x, Eigen::MatrixXd* grad) {
    Tape tape;
    Var vx = tape.leaf(x);
    Var s = tape.silu(vx);
    Var g = tape.sigmoid(s);
    Var q = tape.sqrt_shifted(tape.mul(g, g), 1e-3);
    Var loss = tape.mse_masked(q, target, mask);
    if (grad != nullptr) {
      tape.backward(loss);
      *grad = tape.grad(vx);
    }
    return tape.value(loss)(0, 0);
  };
  check_gradients(f, x0);
}

TEST_CASE("gather/scatter/slice/hcat/row ops gradients match finite differences") {
  Rng rng(3);
  Eigen::MatrixXd x0 = random_matrix(rng, 4, 6);
  Eigen::VectorXd weights = random_matrix(rng, 5, 1);
  Eigen::MatrixXd target = random_matrix(rng, 3, 6);
  Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(3, 6);
  std::vector<int> gather_idx = {0, 2, 3, 1, 2};
  std::vector<int> scatter_idx = {1, 0, 2, 2, 1};

  auto f = [&](const Eigen::MatrixXd& x, Eigen::MatrixXd* grad) {
    Tape tape;
    Var vx = tape.leaf(x);
    Var gathered = tape.gather_rows(vx, gather_idx);            // 5 x 6
    Var weighted = tape.row_scale(gathered, weights);           // 5 x 6
    Var pooled = tape.scatter_add_rows(weighted, scatter_idx, 3); // 3 x 6
    Var left = tape.slice_cols(pooled, 0, 2);
    Var right = tape.slice_cols(pooled, 2, 4);
    Var joined = tape.hcat(left, right); // reassembled 3 x 6
    Var loss = tape.mse_masked(joined, target, mask);
    if (grad != nullptr) {
      tape.backward(loss);
      *grad = tape.grad(vx);
    }
    return tape.value(loss)(0, 0);
  };
  check_gradients(f, x0);
}

TEST_CASE("add_row and sum_rows gradients match finite differences") {
  Rng rng(4);
  Eigen::MatrixXd x0 = random_matrix(rng, 3, 4);
  Eigen::MatrixXd row0 = random_matrix(rng, 1, 4);
  Eigen::MatrixXd target = random_matrix(rng, 1, 4);
  Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(1, 4);

  auto f_x = [&](const Eigen::MatrixXd& x, Eigen::MatrixXd* grad) {
    Tape tape;
    Var vx = tape.leaf(x);
    Var vrow = tape.constant(row0);
    Var loss = tape.mse_masked(tape.sum_rows(tape.add_row(vx, vrow)), target, mask);
    if (grad != nullptr) {
      tape.backward(loss);
      *grad = tape.grad(vx);
    }
    return tape.value(loss)(0, 0);
  };
  check_gradients(f_x, x0);

  auto f_row = [&](const Eigen::MatrixXd& row, Eigen::MatrixXd* grad) {
    Tape tape;
    Var vx = tape.constant(x0);
    Var vrow = tape.leaf(row);
    Var loss = tape.mse_masked(tape.sum_rows(tape.add_row(vx, vrow)), target, mask);
    if (grad != nullptr) {
      tape.backward(loss);
      *grad = tape.grad(vrow);
    }
    return tape.value(loss)(0, 0);
  };
  check_gradients(f_row, row0);
}

TEST_CASE("l1_masked uses sign gradients away from kinks and masks entries") {
  Rng rng(5);
  Eigen::MatrixXd x0 = random_matrix(rng, 3, 3);
  Eigen::MatrixXd target = random_matrix(rng, 3, 3);
  Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(3, 3);
  mask.row(1).setZero();

  auto f = [&](const Eigen::MatrixXd& x, Eigen::MatrixXd* grad) {
    Tape tape;
    Var vx = tape.leaf(x);
    Var loss = tape.l1_masked(vx, target, mask);
    if (grad != nullptr) {
      tape.backward(loss);
      *grad = tape.grad(vx);
    }
    return tape.value(loss)(0, 0);
  };
  check_gradients(f, x0);

  // Masked entries must not contribute.
  Tape tape;
  Var vx = tape.leaf(x0);
  Var loss = tape.l1_masked(vx, target, mask);
  tape.backward(loss);
  CHECK(tape.grad(vx).row(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("l1_masked at a kink yields a subgradient bracketed by one-sided slopes") {
  // Single entry exactly at the kink: gradient convention is sign(0) = 0,
  // inside [-1, 1] scaled by 1/count.
  Eigen::MatrixXd x(1, 2);
  x << 0.5, 0.3;
  Eigen::MatrixXd target = x; // diff = 0 at both entries
  Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(1, 2);
  Tape tape;
  Var vx = tape.leaf(x);
  Var loss = tape.l1_masked(vx, target, mask);
  tape.backward(loss);
  const double h = 1e-5;
  for (int j = 0; j < 2; ++j) {
    Eigen::MatrixXd plus = x, minus = x;
    plus(0, j) += h;
    minus(0, j) -= h;
    Tape tp, tm;
    double up = tp.value(tp.l1_masked(tp.leaf(plus), target, mask))(0, 0);
    double down = tm.value(tm.l1_masked(tm.leaf(minus), target, mask))(0, 0);
    double right_slope = (up - tape.value(loss)(0, 0)) / h;
    double left_slope = (tape.value(loss)(0, 0) - down) / h;
    CHECK(tape.grad(vx)(0, j) >= left_slope - 1e-9);
    CHECK(tape.grad(vx)(0, j) <= right_slope + 1e-9);
  }
}

TEST_CASE("bce_with_logit gradient matches finite differences") {
  for (double label : {0.0, 1.0}) {
    for (double weight : {1.0, 2.5}) {
      auto f = [&](const Eigen::MatrixXd& logit, Eigen::MatrixXd* grad) {
        Tape tape;
        Var v = tape.leaf(logit);
        Var loss = tape.bce_with_logit(v, label, weight);
        if (grad != nullptr) {
          tape.backward(loss);
          *grad = tape.grad(v);
        }
        return tape.value(loss)(0, 0);
      };
      Eigen::MatrixXd logit(1, 1);
      logit << 0.37;
      check_gradients(f, logit);
      logit << -2.3;
      check_gradients(f, logit);
    }
  }
}

TEST_CASE("constants receive no gradients and zero-size edge cases work") {
  Tape tape;
  Var c = tape.constant(Eigen::MatrixXd::Ones(2, 2));
  Var x = tape.leaf(Eigen::MatrixXd::Ones(2, 2));
  Var y = tape.mul(c, x);
  Var loss = tape.mse_masked(y, Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Ones(2, 2));
  tape.backward(loss);
  CHECK(tape.grad(c).size() == 0);
  CHECK(tape.grad(x).size() == 4);

  // Empty gather/scatter (no edges).
  Tape t2;
  Var src = t2.leaf(Eigen::MatrixXd::Ones(3, 2));
  Var none = t2.gather_rows(src, {});
  Var back = t2.scatter_add_rows(none, {}, 3);
  CHECK(t2.value(back).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("shape mismatches are rejected") {
  Tape tape;
  Var a = tape.leaf(Eigen::MatrixXd::Ones(2, 3));
  Var b = tape.leaf(Eigen::MatrixXd::Ones(3, 2));
  CHECK_THROWS_AS(tape.add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(tape.mul(a, b), std::invalid_argument);
  CHECK_THROWS_AS(tape.matmul(a, a), std::invalid_argument);
  CHECK_THROWS_AS(tape.backward(a), std::invalid_argument);
}
