#include "graphident/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "graphident/errors.hpp"

namespace graphident::ad {

const Eigen::MatrixXd& Var::value() const { return tape_->value(id_); }
const Eigen::MatrixXd& Var::grad() const { return tape_->grad(id_); }

double Var::scalar() const {
  const auto& v = value();
  if (v.size() != 1) throw DimensionError("Var::scalar on a non-scalar value");
  return v(0, 0);
}

Var Tape::variable(Eigen::MatrixXd value) {
  nodes_.push_back(Node{std::move(value), {}, {}, true});
  return {this, nodes_.size() - 1};
}

Var Tape::constant(Eigen::MatrixXd value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return {this, nodes_.size() - 1};
}

Var Tape::constant(double value) { return constant(Eigen::MatrixXd::Constant(1, 1, value)); }

Var Tape::record(Eigen::MatrixXd value, std::initializer_list<Var> inputs, Backprop backprop) {
  bool needs = false;
  for (const Var& in : inputs) {
    if (&in.tape() != this) throw Error("autodiff: mixing variables from different tapes");
    needs = needs || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backprop) : Backprop{}, needs});
  return {this, nodes_.size() - 1};
}

void Tape::backward(const Var& output) {
  if (&output.tape() != this) throw Error("autodiff: output belongs to another tape");
  if (output.value().size() != 1) throw DimensionError("backward needs a scalar output");
  for (Node& node : nodes_) {
    if (node.requires_grad) {
      node.grad.setZero(node.value.rows(), node.value.cols());
    } else {
      node.grad.resize(0, 0);
    }
  }
  visited_.clear();
  if (!nodes_[output.id()].requires_grad) return;
  nodes_[output.id()].grad.setOnes(1, 1);
  for (std::size_t k = output.id() + 1; k-- > 0;) {
    Node& node = nodes_[k];
    if (!node.backprop) continue;
    visited_.push_back(k);
    node.backprop(*this, k);
  }
}

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

bool broadcastable(const MatrixXd& v, Index rows, Index cols) {
  if (v.rows() == rows && v.cols() == cols) return true;
  if (v.size() == 1) return true;
  if (v.rows() == 1 && v.cols() == cols) return true;
  if (v.cols() == 1 && v.rows() == rows) return true;
  return false;
}

std::pair<Index, Index> result_shape(const MatrixXd& a, const MatrixXd& b, const char* op) {
  if (broadcastable(b, a.rows(), a.cols())) return {a.rows(), a.cols()};
  if (broadcastable(a, b.rows(), b.cols())) return {b.rows(), b.cols()};
  throw DimensionError(std::string("autodiff ") + op + ": incompatible shapes " + std::to_string(a.rows()) + "x" +
                       std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                       std::to_string(b.cols()));
}

MatrixXd expand(const MatrixXd& v, Index rows, Index cols) {
  if (v.rows() == rows && v.cols() == cols) return v;
  if (v.size() == 1) return MatrixXd::Constant(rows, cols, v(0, 0));
  if (v.rows() == 1) return v.replicate(rows, 1);
  return v.replicate(1, cols);
}

/// Sums a broadcast gradient back down to the operand's shape.
MatrixXd reduce(const MatrixXd& g, Index rows, Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  if (rows == 1 && cols == 1) return MatrixXd::Constant(1, 1, g.sum());
  if (rows == 1) return g.colwise().sum();
  return g.rowwise().sum();
}

void accumulate(Tape& t, const Var& v, const MatrixXd& g) {
  if (t.requires_grad(v.id())) t.grad_ref(v.id()) += reduce(g, v.rows(), v.cols());
}

template <typename Forward, typename GradA, typename GradB>
Var binary(const Var& a, const Var& b, const char* name, Forward fwd, GradA ga, GradB gb) {
  const auto [r, c] = result_shape(a.value(), b.value(), name);
  const MatrixXd av = expand(a.value(), r, c);
  const MatrixXd bv = expand(b.value(), r, c);
  MatrixXd out = fwd(av.array(), bv.array()).matrix();
  return a.tape().record(std::move(out), {a, b}, [a, b, r = r, c = c, ga, gb](Tape& t, std::size_t self) {
    const MatrixXd& g = t.grad(self);
    const MatrixXd av = expand(a.value(), r, c);
    const MatrixXd bv = expand(b.value(), r, c);
    if (t.requires_grad(a.id())) accumulate(t, a, ga(g.array(), av.array(), bv.array()).matrix());
    if (t.requires_grad(b.id())) accumulate(t, b, gb(g.array(), av.array(), bv.array()).matrix());
  });
}

template <typename Forward, typename Deriv>
Var unary(const Var& a, Forward fwd, Deriv deriv) {
  MatrixXd out = fwd(a.value().array()).matrix();
  return a.tape().record(std::move(out), {a}, [a, deriv](Tape& t, std::size_t self) {
    const MatrixXd local = deriv(a.value().array(), t.value(self).array()).matrix();
    t.grad_ref(a.id()) += t.grad(self).cwiseProduct(local);
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  return binary(
      a, b, "add", [](const auto& x, const auto& y) { return x + y; },
      [](const auto& g, const auto&, const auto&) { return g; },
      [](const auto& g, const auto&, const auto&) { return g; });
}

Var sub(const Var& a, const Var& b) {
  return binary(
      a, b, "sub", [](const auto& x, const auto& y) { return x - y; },
      [](const auto& g, const auto&, const auto&) { return g; },
      [](const auto& g, const auto&, const auto&) { return -g; });
}

Var mul(const Var& a, const Var& b) {
  return binary(
      a, b, "mul", [](const auto& x, const auto& y) { return x * y; },
      [](const auto& g, const auto&, const auto& y) { return g * y; },
      [](const auto& g, const auto& x, const auto&) { return g * x; });
}

Var div(const Var& a, const Var& b) {
  return binary(
      a, b, "div", [](const auto& x, const auto& y) { return x / y; },
      [](const auto& g, const auto&, const auto& y) { return g / y; },
      [](const auto& g, const auto& x, const auto& y) { return -g * x / (y * y); });
}

Var scale(const Var& a, double factor) {
  return a.tape().record(a.value() * factor, {a},
                         [a, factor](Tape& t, std::size_t self) { t.grad_ref(a.id()) += factor * t.grad(self); });
}

Var add_scalar(const Var& a, double offset) {
  MatrixXd out = a.value().array() + offset;
  return a.tape().record(std::move(out), {a},
                         [a](Tape& t, std::size_t self) { t.grad_ref(a.id()) += t.grad(self); });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("autodiff matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " times " +
                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  return a.tape().record(a.value() * b.value(), {a, b}, [a, b](Tape& t, std::size_t self) {
    const MatrixXd& g = t.grad(self);
    if (t.requires_grad(a.id())) t.grad_ref(a.id()).noalias() += g * b.value().transpose();
    if (t.requires_grad(b.id())) t.grad_ref(b.id()).noalias() += a.value().transpose() * g;
  });
}

Var transpose(const Var& a) {
  return a.tape().record(a.value().transpose(), {a},
                         [a](Tape& t, std::size_t self) { t.grad_ref(a.id()) += t.grad(self).transpose(); });
}

Var reshape(const Var& a, Index rows, Index cols) {
  if (rows * cols != a.value().size()) throw DimensionError("autodiff reshape: size mismatch");
  MatrixXd out = a.value().reshaped(rows, cols);
  return a.tape().record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
    t.grad_ref(a.id()) += t.grad(self).reshaped(a.rows(), a.cols());
  });
}

Var concat(const Var& a, const Var& b, int axis) {
  MatrixXd out;
  if (axis == 0) {
    if (a.cols() != b.cols()) throw DimensionError("autodiff concat rows: column mismatch");
    out.resize(a.rows() + b.rows(), a.cols());
    out << a.value(), b.value();
  } else {
    if (a.rows() != b.rows()) throw DimensionError("autodiff concat cols: row mismatch");
    out.resize(a.rows(), a.cols() + b.cols());
    out << a.value(), b.value();
  }
  return a.tape().record(std::move(out), {a, b}, [a, b, axis](Tape& t, std::size_t self) {
    const MatrixXd& g = t.grad(self);
    if (axis == 0) {
      if (t.requires_grad(a.id())) t.grad_ref(a.id()) += g.topRows(a.rows());
      if (t.requires_grad(b.id())) t.grad_ref(b.id()) += g.bottomRows(b.rows());
    } else {
      if (t.requires_grad(a.id())) t.grad_ref(a.id()) += g.leftCols(a.cols());
      if (t.requires_grad(b.id())) t.grad_ref(b.id()) += g.rightCols(b.cols());
    }
  });
}

Var slice(const Var& a, Index row, Index col, Index rows, Index cols) {
  if (row < 0 || col < 0 || row + rows > a.rows() || col + cols > a.cols()) {
    throw DimensionError("autodiff slice: block out of range");
  }
  return a.tape().record(a.value().block(row, col, rows, cols), {a},
                         [a, row, col, rows, cols](Tape& t, std::size_t self) {
                           t.grad_ref(a.id()).block(row, col, rows, cols) += t.grad(self);
                         });
}

Var gather(const Var& a, std::vector<Index> indices) {
  MatrixXd out(static_cast<Index>(indices.size()), 1);
  const auto flat = a.value().reshaped();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] < 0 || indices[k] >= a.value().size()) throw DimensionError("autodiff gather: index out of range");
    out(static_cast<Index>(k), 0) = flat(indices[k]);
  }
  return a.tape().record(std::move(out), {a}, [a, idx = std::move(indices)](Tape& t, std::size_t self) {
    auto flat_grad = t.grad_ref(a.id()).reshaped();
    const MatrixXd& g = t.grad(self);
    for (std::size_t k = 0; k < idx.size(); ++k) flat_grad(idx[k]) += g(static_cast<Index>(k), 0);
  });
}

Var sum(const Var& a) {
  return a.tape().record(MatrixXd::Constant(1, 1, a.value().sum()), {a}, [a](Tape& t, std::size_t self) {
    t.grad_ref(a.id()).array() += t.grad(self)(0, 0);
  });
}

Var mean(const Var& a) {
  const auto count = static_cast<double>(a.value().size());
  return a.tape().record(MatrixXd::Constant(1, 1, a.value().sum() / count), {a},
                         [a, count](Tape& t, std::size_t self) {
                           t.grad_ref(a.id()).array() += t.grad(self)(0, 0) / count;
                         });
}

Var relu(const Var& a) {
  return unary(
      a, [](const auto& x) { return x.max(0.0); },
      [](const auto& x, const auto&) { return (x > 0.0).template cast<double>(); });
}

Var sqrt(const Var& a) {
  return unary(
      a, [](const auto& x) { return x.sqrt(); },
      [](const auto& x, const auto&) { return 0.5 / x.max(1e-12).sqrt(); });
}

Var log(const Var& a) {
  return unary(
      a, [](const auto& x) { return x.log(); }, [](const auto& x, const auto&) { return x.inverse(); });
}

Var exp(const Var& a) {
  return unary(
      a, [](const auto& x) { return x.exp(); }, [](const auto&, const auto& y) { return y; });
}

Var tanh(const Var& a) {
  return unary(
      a, [](const auto& x) { return x.tanh(); }, [](const auto&, const auto& y) { return 1.0 - y.square(); });
}

Var sigmoid(const Var& a) {
  return unary(
      a, [](const auto& x) { return 1.0 / (1.0 + (-x).exp()); },
      [](const auto&, const auto& y) { return y * (1.0 - y); });
}

Var abs(const Var& a) {
  return unary(
      a, [](const auto& x) { return x.abs(); },
      [](const auto& x, const auto&) {
        return (x > 0.0).template cast<double>() - (x < 0.0).template cast<double>();
      });
}

Var square(const Var& a) {
  return unary(
      a, [](const auto& x) { return x.square(); }, [](const auto& x, const auto&) { return 2.0 * x; });
}

Var softmax_rows(const Var& a) {
  MatrixXd out = a.value();
  for (Index i = 0; i < out.rows(); ++i) {
    const double peak = out.row(i).maxCoeff();
    out.row(i) = (out.row(i).array() - peak).exp();
    out.row(i) /= out.row(i).sum();
  }
  return a.tape().record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const MatrixXd& y = t.value(self);
    const MatrixXd& g = t.grad(self);
    // dx = y o (g - rowsum(g o y))
    const Eigen::VectorXd inner = g.cwiseProduct(y).rowwise().sum();
    t.grad_ref(a.id()) += y.cwiseProduct(g - inner.replicate(1, g.cols()));
  });
}

Var pairwise_sq_dists(const Var& a) {
  const MatrixXd& x = a.value();
  const Index n = x.rows();
  MatrixXd out = MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double v = (x.row(i) - x.row(j)).squaredNorm();
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return a.tape().record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const MatrixXd& x = a.value();
    const MatrixXd& g = t.grad(self);
    // D_ij = |x_i - x_j|^2  =>  dL/dx_i = 2 sum_j (G_ij + G_ji)(x_i - x_j)
    const MatrixXd gs = g + g.transpose();
    const Eigen::VectorXd row_sums = gs.rowwise().sum();
    t.grad_ref(a.id()).noalias() += 2.0 * (row_sums.asDiagonal() * x - gs * x);
  });
}

GradientCheckReport gradient_check(const RecordedFunction& f, const std::vector<Eigen::MatrixXd>& params,
                                   double step, double tolerance, const std::vector<Coordinate>& coordinates,
                                   double abs_floor) {
  std::vector<Coordinate> coords = coordinates;
  if (coords.empty()) {
    for (std::size_t p = 0; p < params.size(); ++p) {
      for (Index k = 0; k < params[p].size(); ++k) coords.push_back({p, k});
    }
  }

  std::vector<MatrixXd> analytic_grads;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& p : params) leaves.push_back(tape.variable(p));
    const Var out = f(tape, leaves);
    tape.backward(out);
    for (const auto& leaf : leaves) analytic_grads.push_back(leaf.grad());
  }

  auto evaluate = [&](const std::vector<MatrixXd>& ps) {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& p : ps) leaves.push_back(tape.constant(p));
    return f(tape, leaves).scalar();
  };

  GradientCheckReport report;
  std::vector<MatrixXd> probe = params;
  for (const Coordinate& c : coords) {
    const double original = probe[c.param].reshaped()(c.index);
    probe[c.param].reshaped()(c.index) = original + step;
    const double up = evaluate(probe);
    probe[c.param].reshaped()(c.index) = original - step;
    const double down = evaluate(probe);
    probe[c.param].reshaped()(c.index) = original;

    const double numeric = (up - down) / (2.0 * step);
    const double analytic = analytic_grads[c.param].reshaped()(c.index);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), abs_floor});
    const double rel = std::abs(analytic - numeric) / denom;
    report.analytic.push_back(analytic);
    report.numeric.push_back(numeric);
    report.relative_errors.push_back(rel);
    report.max_relative_error = std::max(report.max_relative_error, rel);
  }
  report.passed = report.max_relative_error <= tolerance;
  return report;
}

}  // namespace graphident::ad
