#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Core>

// Minimal reverse-mode automatic differentiation over dense double matrices.
//
// A Tape records every operation in creation order, so the inputs of node k
// always have indices below k and a single backward sweep from the output to
// node 0 is a valid reverse topological traversal. Values are Eigen::MatrixXd;
// scalars are 1x1 matrices.
//
// Elementwise binary operations broadcast an operand that is 1x1, a single
// row (1 x c) or a single column (r x 1) against the other operand's shape.

namespace graphident::ad {

class Tape;

/// Handle to a recorded value. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Eigen::MatrixXd& value() const;
  const Eigen::MatrixXd& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 variable.
  double scalar() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backprop = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that receives a gradient.
  Var variable(Eigen::MatrixXd value);
  /// Leaf that never receives a gradient.
  Var constant(Eigen::MatrixXd value);
  Var constant(double value);

  /// Records an operation node. `backprop` reads grad(self) and accumulates
  /// into the gradients of the node's inputs.
  Var record(Eigen::MatrixXd value, std::initializer_list<Var> inputs, Backprop backprop);

  /// Reverse sweep from a scalar output. Leaves created with variable() end
  /// with a gradient of their own shape (zero if unused).
  void backward(const Var& output);

  const Eigen::MatrixXd& value(std::size_t id) const { return nodes_[id].value; }
  const Eigen::MatrixXd& grad(std::size_t id) const { return nodes_[id].grad; }
  /// Gradient accumulator of a node during backward.
  Eigen::MatrixXd& grad_ref(std::size_t id) { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  std::size_t size() const { return nodes_.size(); }
  /// Node ids whose adjoint rule ran during the last backward(), in visit order.
  const std::vector<std::size_t>& last_backward_order() const { return visited_; }

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    Backprop backprop;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  std::vector<std::size_t> visited_;
};

// Elementwise arithmetic with broadcasting.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);
Var neg(const Var& a);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);
Var concat(const Var& a, const Var& b, int axis);
Var slice(const Var& a, Eigen::Index row, Eigen::Index col, Eigen::Index rows, Eigen::Index cols);
/// Column vector of a's entries at the given column-major linear indices.
Var gather(const Var& a, std::vector<Eigen::Index> indices);

Var sum(const Var& a);
Var mean(const Var& a);

/// max(0, x); the derivative at exactly 0 is taken as 0.
Var relu(const Var& a);
/// sqrt; the adjoint evaluates 1/(2 sqrt(max(x, 1e-12))).
Var sqrt(const Var& a);
Var log(const Var& a);
Var exp(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var abs(const Var& a);
Var square(const Var& a);
/// Row-wise softmax (each row sums to one).
Var softmax_rows(const Var& a);

/// n x n squared Euclidean distances between the rows of a.
Var pairwise_sq_dists(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator-(const Var& a) { return neg(a); }
inline Var operator*(const Var& a, double k) { return scale(a, k); }
inline Var operator*(double k, const Var& a) { return scale(a, k); }
inline Var operator+(const Var& a, double k) { return add_scalar(a, k); }
inline Var operator-(const Var& a, double k) { return add_scalar(a, -k); }

/// A scalar function of several matrix parameters, recorded on a fresh tape.
using RecordedFunction = std::function<Var(Tape&, const std::vector<Var>& params)>;

struct GradientCheckReport {
  std::vector<double> analytic;
  std::vector<double> numeric;
  std::vector<double> relative_errors;
  double max_relative_error = 0.0;
  bool passed = false;
};

/// Coordinate (parameter index, column-major entry index) to probe.
struct Coordinate {
  std::size_t param;
  Eigen::Index index;
};

/// Compares backward() against central differences. The relative error of a
/// coordinate is |a - n| / max(|a|, |n|, abs_floor).
GradientCheckReport gradient_check(const RecordedFunction& f, const std::vector<Eigen::MatrixXd>& params,
                                   double step, double tolerance, const std::vector<Coordinate>& coordinates = {},
                                   double abs_floor = 1e-8);

}  // namespace graphident::ad
