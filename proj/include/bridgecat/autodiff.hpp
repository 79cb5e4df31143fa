#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace bridgecat::ad {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over dense matrices. Nodes are appended in topological
/// order; backward() walks the tape once in reverse. Constants never receive
/// gradients, so backward functions skip work for them.
class Tape {
public:
  Var constant(Eigen::MatrixXd value);
  Var leaf(Eigen::MatrixXd value); // gradient-tracked input (parameter)

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b); // elementwise
  Var scale(Var a, double factor);
  Var matmul(Var a, Var b);
  Var add_row(Var a, Var row); // broadcast a 1 x C row across all rows of a
  Var silu(Var a);
  Var sigmoid(Var a);
  Var sqrt_shifted(Var a, double shift); // sqrt(a + shift), shift > 0
  Var gather_rows(Var a, std::vector<int> index);
  Var scatter_add_rows(Var a, std::vector<int> index, Eigen::Index out_rows);
  Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
  Var hcat(Var a, Var b);
  Var row_scale(Var a, Eigen::VectorXd weights); // scale row i by weights[i]
  Var sum_rows(Var a);                           // 1 x C column sums

  /// Mean of |pred - target| over entries where mask != 0. Gradient uses
  /// sign(0) = 0 at kinks.
  Var l1_masked(Var pred, const Eigen::MatrixXd& target, const Eigen::MatrixXd& mask);
  /// Mean of (pred - target)^2 over entries where mask != 0.
  Var mse_masked(Var pred, const Eigen::MatrixXd& target, const Eigen::MatrixXd& mask);
  /// weight * (softplus(logit) - label * logit) for a 1 x 1 logit.
  Var bce_with_logit(Var logit, double label, double weight);

  /// Seeds d(loss)/d(loss) = 1 and accumulates gradients for every
  /// gradient-tracked node. `loss` must be 1 x 1.
  void backward(Var loss);

  const Eigen::MatrixXd& value(Var v) const { return nodes_[check(v)].value; }
  const Eigen::MatrixXd& grad(Var v) const { return nodes_[check(v)].grad; }
  bool requires_grad(Var v) const { return nodes_[check(v)].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    bool requires_grad = false;
    std::function<void(Tape&, const Eigen::MatrixXd&)> backward;
  };

  std::size_t check(Var v) const;
  Var push(Eigen::MatrixXd value, bool requires_grad,
           std::function<void(Tape&, const Eigen::MatrixXd&)> backward);
  void accumulate(Var v, const Eigen::MatrixXd& g);

  std::vector<Node> nodes_;
};

} // namespace bridgecat::ad
