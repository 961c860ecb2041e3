#pragma once

#include <cmath>
#include <cstddef>
#include <utility>

#include <Eigen/Core>

#include "graphident/errors.hpp"
#include "graphident/tensor.hpp"

// Dense graph primitives: adjacency matrices are plain n x n Eigen matrices,
// edge-weight vectors are their half-vectorization. Every module uses the
// single ordering defined by edge_index() below.

namespace graphident {

/// Number of unordered node pairs, n(n-1)/2.
constexpr Eigen::Index edge_count(Eigen::Index n) { return n * (n - 1) / 2; }

/// Position of pair (i, j), i < j, in the strict-upper-triangle row-major ordering.
constexpr Eigen::Index edge_index(Eigen::Index i, Eigen::Index j, Eigen::Index n) {
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

/// Recovers n from a weight-vector length m = n(n-1)/2; throws if m is not triangular.
Eigen::Index nodes_from_edge_count(Eigen::Index m);

template <typename Derived>
void validate_adjacency(const Eigen::MatrixBase<Derived>& W, typename Derived::Scalar tol = 0) {
  using std::abs;
  if (W.rows() != W.cols()) throw DimensionError("adjacency matrix must be square");
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    if (W(i, i) != typename Derived::Scalar(0)) {
      throw InvariantError("adjacency matrix has a nonzero diagonal entry at " + std::to_string(i));
    }
    for (Eigen::Index j = i + 1; j < W.cols(); ++j) {
      if (abs(W(i, j) - W(j, i)) > tol) throw InvariantError("adjacency matrix is not symmetric");
      if (W(i, j) < 0) throw InvariantError("adjacency matrix has a negative entry");
    }
  }
}

template <typename Derived>
VectorX<typename Derived::Scalar> half_vectorize(const Eigen::MatrixBase<Derived>& W) {
  validate_adjacency(W);
  const Eigen::Index n = W.rows();
  VectorX<typename Derived::Scalar> w(edge_count(n));
  Eigen::Index e = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) w(e++) = W(i, j);
  }
  return w;
}

template <typename Derived>
MatrixX<typename Derived::Scalar> devectorize(const Eigen::MatrixBase<Derived>& w, Eigen::Index n) {
  if (w.size() != edge_count(n)) throw DimensionError("weight vector length does not match n(n-1)/2");
  MatrixX<typename Derived::Scalar> W = MatrixX<typename Derived::Scalar>::Zero(n, n);
  Eigen::Index e = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      W(i, j) = w(e);
      W(j, i) = w(e);
      ++e;
    }
  }
  return W;
}

/// Dense 0/1 operator S with S * vech(W) == W * 1.
template <typename Scalar = double>
MatrixX<Scalar> sum_operator(Eigen::Index n) {
  if (n < 2) throw DomainError("sum operator needs n >= 2");
  MatrixX<Scalar> S = MatrixX<Scalar>::Zero(n, edge_count(n));
  Eigen::Index e = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      S(i, e) = Scalar(1);
      S(j, e) = Scalar(1);
      ++e;
    }
  }
  return S;
}

/// S * w without materializing S.
template <typename Derived>
VectorX<typename Derived::Scalar> apply_sum_operator(const Eigen::MatrixBase<Derived>& w, Eigen::Index n) {
  VectorX<typename Derived::Scalar> deg = VectorX<typename Derived::Scalar>::Zero(n);
  Eigen::Index e = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      deg(i) += w(e);
      deg(j) += w(e);
      ++e;
    }
  }
  return deg;
}

/// S^T * lambda: entry (i, j) is lambda_i + lambda_j.
template <typename Derived>
VectorX<typename Derived::Scalar> apply_sum_operator_transpose(const Eigen::MatrixBase<Derived>& lambda) {
  const Eigen::Index n = lambda.size();
  VectorX<typename Derived::Scalar> out(edge_count(n));
  Eigen::Index e = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) out(e++) = lambda(i) + lambda(j);
  }
  return out;
}

template <typename Derived>
MatrixX<typename Derived::Scalar> laplacian(const Eigen::MatrixBase<Derived>& W) {
  MatrixX<typename Derived::Scalar> L = -W;
  L.diagonal() = W.rowwise().sum();
  return L;
}

/// Squared Euclidean distances between the rows of X.
template <typename Derived>
MatrixX<typename Derived::Scalar> distance_matrix(const Eigen::MatrixBase<Derived>& X) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = X.rows();
  MatrixX<Scalar> Y = MatrixX<Scalar>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Scalar v = (X.row(i) - X.row(j)).squaredNorm();
      Y(i, j) = v;
      Y(j, i) = v;
    }
  }
  return Y;
}

/// Distances between full (component x time) trajectories.
MatrixX<double> distance_matrix(const TrajectoryTensor& X);

/// trace(X^T L X) for a scalar-signal n x d matrix X.
template <typename DerivedX, typename DerivedW>
typename DerivedX::Scalar total_variation(const Eigen::MatrixBase<DerivedX>& X,
                                          const Eigen::MatrixBase<DerivedW>& W) {
  if (X.rows() != W.rows()) throw DimensionError("signal rows must match node count");
  return (X.transpose() * laplacian(W) * X).trace();
}

/// Scalar-signal total variation; requires s == 1.
double total_variation(const TrajectoryTensor& X, const Eigen::MatrixXd& W);

/// x^T (L kron I_s) x summed over the window, computed per state component.
double total_variation_multi(const TrajectoryTensor& X, const Eigen::MatrixXd& W);

/// Right-hand side of the trace/distance identity: 0.5 * ||W o Y||_1.
template <typename DerivedW, typename DerivedY>
typename DerivedW::Scalar weighted_distance_sum(const Eigen::MatrixBase<DerivedW>& W,
                                                const Eigen::MatrixBase<DerivedY>& Y) {
  return typename DerivedW::Scalar(0.5) * W.cwiseProduct(Y).cwiseAbs().sum();
}

/// Row-wise complement graph before symmetrization: row i spreads its degree
/// evenly over the off-diagonal positions where W is zero. Fully dense rows stay zero.
template <typename Derived>
MatrixX<typename Derived::Scalar> adjoint_raw(const Eigen::MatrixBase<Derived>& W) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = W.rows();
  MatrixX<Scalar> A = MatrixX<Scalar>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index free_slots = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i && W(i, j) == Scalar(0)) ++free_slots;
    }
    if (free_slots == 0) continue;
    const Scalar value = W.row(i).sum() / Scalar(free_slots);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i && W(i, j) == Scalar(0)) A(i, j) = value;
    }
  }
  return A;
}

template <typename Derived>
MatrixX<typename Derived::Scalar> adjoint(const Eigen::MatrixBase<Derived>& W) {
  const MatrixX<typename Derived::Scalar> A = adjoint_raw(W);
  return typename Derived::Scalar(0.5) * (A + A.transpose());
}

/// (1/n^2) * sum |W_hat - W|, diagonal included.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar mae(const Eigen::MatrixBase<DerivedA>& W_hat, const Eigen::MatrixBase<DerivedB>& W) {
  if (W_hat.rows() != W.rows() || W_hat.cols() != W.cols()) throw DimensionError("mae: shape mismatch");
  const auto n = static_cast<typename DerivedA::Scalar>(W.rows());
  return (W_hat - W).cwiseAbs().sum() / (n * n);
}

/// |E| / n^2 with both orientations of an undirected edge counted.
template <typename Derived>
double edge_density(const Eigen::MatrixBase<Derived>& W) {
  const auto n = static_cast<double>(W.rows());
  if (n == 0) return 0.0;
  Eigen::Index nonzero = 0;
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
      if (i != j && W(i, j) != 0) ++nonzero;
    }
  }
  return static_cast<double>(nonzero) / (n * n);
}

struct EdgeRecovery {
  long true_pos = 0;
  long false_pos = 0;
  long false_neg = 0;
  long true_neg = 0;

  /// Fraction of ground-truth edges recovered; 1 when the truth has no edges.
  double recall() const {
    const long edges = true_pos + false_neg;
    return edges == 0 ? 1.0 : static_cast<double>(true_pos) / static_cast<double>(edges);
  }
  bool operator==(const EdgeRecovery&) const = default;
};

/// Confusion counts over the strict upper triangle after thresholding |W_hat - W|.
/// A true edge is recovered when its error is below `threshold`; a non-edge is
/// spurious when the estimate there reaches `threshold`.
EdgeRecovery edge_recovery(const Eigen::MatrixXd& W_hat, const Eigen::MatrixXd& W, double threshold);

}  // namespace graphident
