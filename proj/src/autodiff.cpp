#include "bridgecat/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace bridgecat::ad {

namespace {

void require_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                        const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

} // namespace

std::size_t Tape::check(Var v) const {
  if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw std::invalid_argument("invalid tape variable");
  }
  return static_cast<std::size_t>(v.id);
}

Var Tape::push(Eigen::MatrixXd value, bool requires_grad,
               std::function<void(Tape&, const Eigen::MatrixXd&)> backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(Var v, const Eigen::MatrixXd& g) {
  Node& node = nodes_[check(v)];
  if (node.grad.size() == 0) {
    node.grad = Eigen::MatrixXd::Zero(node.value.rows(), node.value.cols());
  }
  node.grad += g;
}

Var Tape::constant(Eigen::MatrixXd value) { return push(std::move(value), false, nullptr); }

Var Tape::leaf(Eigen::MatrixXd value) { return push(std::move(value), true, nullptr); }

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  bool req = requires_grad(a) || requires_grad(b);
  return push(value(a) + value(b), req, [a, b](Tape& t, const Eigen::MatrixXd& g) {
    if (t.requires_grad(a)) t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate(b, g);
  });
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  bool req = requires_grad(a) || requires_grad(b);
  return push(value(a) - value(b), req, [a, b](Tape& t, const Eigen::MatrixXd& g) {
    if (t.requires_grad(a)) t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate(b, -g);
  });
}

Var Tape::mul(Var a, Var b) {
  require_same_shape(value(a), value(b), "mul");
  bool req = requires_grad(a) || requires_grad(b);
  return push(value(a).cwiseProduct(value(b)), req,
              [a, b](Tape& t, const Eigen::MatrixXd& g) {
                if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
                if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
              });
}

Var Tape::scale(Var a, double factor) {
  return push(value(a) * factor, requires_grad(a),
              [a, factor](Tape& t, const Eigen::MatrixXd& g) {
                if (t.requires_grad(a)) t.accumulate(a, g * factor);
              });
}

Var Tape::matmul(Var a, Var b) {
  if (value(a).cols() != value(b).rows()) {
    throw std::invalid_argument("matmul: shape mismatch");
  }
  bool req = requires_grad(a) || requires_grad(b);
  return push(value(a) * value(b), req, [a, b](Tape& t, const Eigen::MatrixXd& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

Var Tape::add_row(Var a, Var row) {
  if (value(row).rows() != 1 || value(row).cols() != value(a).cols()) {
    throw std::invalid_argument("add_row: row must be 1 x cols(a)");
  }
  Eigen::MatrixXd out = value(a);
  out.rowwise() += value(row).row(0);
  bool req = requires_grad(a) || requires_grad(row);
  return push(std::move(out), req, [a, row](Tape& t, const Eigen::MatrixXd& g) {
    if (t.requires_grad(a)) t.accumulate(a, g);
    if (t.requires_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

Var Tape::silu(Var a) {
  const Eigen::MatrixXd& x = value(a);
  Eigen::MatrixXd sig = (1.0 + (-x.array()).exp()).inverse().matrix();
  return push(x.cwiseProduct(sig), requires_grad(a),
              [a, sig](Tape& t, const Eigen::MatrixXd& g) {
                if (!t.requires_grad(a)) return;
                const Eigen::MatrixXd& x = t.value(a);
                Eigen::MatrixXd d =
                    (sig.array() * (1.0 + x.array() * (1.0 - sig.array()))).matrix();
                t.accumulate(a, g.cwiseProduct(d));
              });
}

Var Tape::sigmoid(Var a) {
  Eigen::MatrixXd out = (1.0 + (-value(a).array()).exp()).inverse().matrix();
  return push(out, requires_grad(a), [a, out](Tape& t, const Eigen::MatrixXd& g) {
    if (!t.requires_grad(a)) return;
    Eigen::MatrixXd d = (out.array() * (1.0 - out.array())).matrix();
    t.accumulate(a, g.cwiseProduct(d));
  });
}

Var Tape::sqrt_shifted(Var a, double shift) {
  if (shift <= 0.0) throw std::invalid_argument("sqrt_shifted: shift must be positive");
  Eigen::MatrixXd out = (value(a).array() + shift).sqrt().matrix();
  return push(out, requires_grad(a), [a, out](Tape& t, const Eigen::MatrixXd& g) {
    if (!t.requires_grad(a)) return;
    t.accumulate(a, (0.5 * g.array() / out.array()).matrix());
  });
}

Var Tape::gather_rows(Var a, std::vector<int> index) {
  const Eigen::MatrixXd& src = value(a);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(index.size()), src.cols());
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] < 0 || index[k] >= src.rows()) {
      throw std::invalid_argument("gather_rows: index out of range");
    }
    out.row(static_cast<Eigen::Index>(k)) = src.row(index[k]);
  }
  return push(std::move(out), requires_grad(a),
              [a, index = std::move(index)](Tape& t, const Eigen::MatrixXd& g) {
                if (!t.requires_grad(a)) return;
                Eigen::MatrixXd d =
                    Eigen::MatrixXd::Zero(t.value(a).rows(), t.value(a).cols());
                for (std::size_t k = 0; k < index.size(); ++k) {
                  d.row(index[k]) += g.row(static_cast<Eigen::Index>(k));
                }
                t.accumulate(a, d);
              });
}

Var Tape::scatter_add_rows(Var a, std::vector<int> index, Eigen::Index out_rows) {
  const Eigen::MatrixXd& src = value(a);
  if (static_cast<Eigen::Index>(index.size()) != src.rows()) {
    throw std::invalid_argument("scatter_add_rows: index size mismatch");
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(out_rows, src.cols());
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] < 0 || index[k] >= out_rows) {
      throw std::invalid_argument("scatter_add_rows: index out of range");
    }
    out.row(index[k]) += src.row(static_cast<Eigen::Index>(k));
  }
  return push(std::move(out), requires_grad(a),
              [a, index = std::move(index)](Tape& t, const Eigen::MatrixXd& g) {
                if (!t.requires_grad(a)) return;
                Eigen::MatrixXd d(static_cast<Eigen::Index>(index.size()), g.cols());
                for (std::size_t k = 0; k < index.size(); ++k) {
                  d.row(static_cast<Eigen::Index>(k)) = g.row(index[k]);
                }
                t.accumulate(a, d);
              });
}

Var Tape::slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > value(a).cols()) {
    throw std::invalid_argument("slice_cols: range out of bounds");
  }
  return push(value(a).middleCols(start, count), requires_grad(a),
              [a, start, count](Tape& t, const Eigen::MatrixXd& g) {
                if (!t.requires_grad(a)) return;
                Eigen::MatrixXd d =
                    Eigen::MatrixXd::Zero(t.value(a).rows(), t.value(a).cols());
                d.middleCols(start, count) = g;
                t.accumulate(a, d);
              });
}

Var Tape::hcat(Var a, Var b) {
  if (value(a).rows() != value(b).rows()) {
    throw std::invalid_argument("hcat: row mismatch");
  }
  Eigen::MatrixXd out(value(a).rows(), value(a).cols() + value(b).cols());
  out << value(a), value(b);
  bool req = requires_grad(a) || requires_grad(b);
  return push(std::move(out), req, [a, b](Tape& t, const Eigen::MatrixXd& g) {
    Eigen::Index ca = t.value(a).cols();
    if (t.requires_grad(a)) t.accumulate(a, g.leftCols(ca));
    if (t.requires_grad(b)) t.accumulate(b, g.rightCols(g.cols() - ca));
  });
}

Var Tape::row_scale(Var a, Eigen::VectorXd weights) {
  if (weights.size() != value(a).rows()) {
    throw std::invalid_argument("row_scale: weight size mismatch");
  }
  Eigen::MatrixXd out = weights.asDiagonal() * value(a);
  return push(std::move(out), requires_grad(a),
              [a, weights = std::move(weights)](Tape& t, const Eigen::MatrixXd& g) {
                if (!t.requires_grad(a)) return;
                t.accumulate(a, weights.asDiagonal() * g);
              });
}

Var Tape::sum_rows(Var a) {
  Eigen::MatrixXd out = value(a).colwise().sum();
  return push(std::move(out), requires_grad(a),
              [a](Tape& t, const Eigen::MatrixXd& g) {
                if (!t.requires_grad(a)) return;
                t.accumulate(a, Eigen::MatrixXd::Ones(t.value(a).rows(), 1) * g);
              });
}

Var Tape::l1_masked(Var pred, const Eigen::MatrixXd& target, const Eigen::MatrixXd& mask) {
  require_same_shape(value(pred), target, "l1_masked");
  require_same_shape(value(pred), mask, "l1_masked");
  double count = static_cast<double>((mask.array() != 0.0).count());
  if (count == 0.0) throw std::invalid_argument("l1_masked: empty mask");
  Eigen::MatrixXd diff = value(pred) - target;
  double loss = (diff.array().abs() * (mask.array() != 0.0).cast<double>()).sum() / count;
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = loss;
  return push(std::move(out), requires_grad(pred),
              [pred, diff, mask, count](Tape& t, const Eigen::MatrixXd& g) {
                if (!t.requires_grad(pred)) return;
                Eigen::ArrayXXd sgn = diff.array().sign() * (mask.array() != 0.0).cast<double>();
                t.accumulate(pred, (g(0, 0) / count) * sgn.matrix());
              });
}

Var Tape::mse_masked(Var pred, const Eigen::MatrixXd& target, const Eigen::MatrixXd& mask) {
  require_same_shape(value(pred), target, "mse_masked");
  require_same_shape(value(pred), mask, "mse_masked");
  double count = static_cast<double>((mask.array() != 0.0).count());
  if (count == 0.0) throw std::invalid_argument("mse_masked: empty mask");
  Eigen::MatrixXd diff = value(pred) - target;
  double loss = (diff.array().square() * (mask.array() != 0.0).cast<double>()).sum() / count;
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = loss;
  return push(std::move(out), requires_grad(pred),
              [pred, diff, mask, count](Tape& t, const Eigen::MatrixXd& g) {
                if (!t.requires_grad(pred)) return;
                Eigen::ArrayXXd d = 2.0 * diff.array() * (mask.array() != 0.0).cast<double>();
                t.accumulate(pred, (g(0, 0) / count) * d.matrix());
              });
}

Var Tape::bce_with_logit(Var logit, double label, double weight) {
  if (value(logit).rows() != 1 || value(logit).cols() != 1) {
    throw std::invalid_argument("bce_with_logit: logit must be 1 x 1");
  }
  double x = value(logit)(0, 0);
  double softplus = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = weight * (softplus - label * x);
  return push(std::move(out), requires_grad(logit),
              [logit, label, weight](Tape& t, const Eigen::MatrixXd& g) {
                if (!t.requires_grad(logit)) return;
                double x = t.value(logit)(0, 0);
                double sig = 1.0 / (1.0 + std::exp(-x));
                Eigen::MatrixXd d(1, 1);
                d(0, 0) = g(0, 0) * weight * (sig - label);
                t.accumulate(logit, d);
              });
}

void Tape::backward(Var loss) {
  std::size_t idx = check(loss);
  const Node& loss_node = nodes_[idx];
  if (loss_node.value.rows() != 1 || loss_node.value.cols() != 1) {
    throw std::invalid_argument("backward: loss must be 1 x 1");
  }
  accumulate(loss, Eigen::MatrixXd::Ones(1, 1));
  for (std::size_t k = nodes_.size(); k-- > 0;) {
    Node& node = nodes_[k];
    if (!node.backward || node.grad.size() == 0) continue;
    node.backward(*this, node.grad);
  }
}

} // namespace bridgecat::ad
