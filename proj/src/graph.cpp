#include "graphident/graph.hpp"

#include <cmath>

namespace graphident {

Eigen::Index nodes_from_edge_count(Eigen::Index m) {
  const auto n = static_cast<Eigen::Index>(std::llround((1.0 + std::sqrt(1.0 + 8.0 * static_cast<double>(m))) / 2.0));
  if (edge_count(n) != m || n < 2) {
    throw DimensionError("weight vector length " + std::to_string(m) + " is not n(n-1)/2 for any n >= 2");
  }
  return n;
}

MatrixX<double> distance_matrix(const TrajectoryTensor& X) { return distance_matrix(X.flattened()); }

double total_variation(const TrajectoryTensor& X, const Eigen::MatrixXd& W) {
  if (X.state_dim() != 1) {
    throw DimensionError("scalar total variation needs s == 1, got s = " + std::to_string(X.state_dim()));
  }
  return total_variation(X.channel(0), W);
}

double total_variation_multi(const TrajectoryTensor& X, const Eigen::MatrixXd& W) {
  if (static_cast<Eigen::Index>(X.nodes()) != W.rows()) throw DimensionError("signal rows must match node count");
  const Eigen::MatrixXd L = laplacian(W);
  double tv = 0.0;
  for (std::size_t c = 0; c < X.state_dim(); ++c) {
    const auto Xc = X.channel(c);
    tv += (Xc.transpose() * L * Xc).trace();
  }
  return tv;
}

EdgeRecovery edge_recovery(const Eigen::MatrixXd& W_hat, const Eigen::MatrixXd& W, double threshold) {
  if (!(threshold > 0)) throw DomainError("edge_recovery threshold must be positive");
  if (W_hat.rows() != W.rows() || W_hat.cols() != W.cols()) throw DimensionError("edge_recovery: shape mismatch");
  EdgeRecovery r;
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < W.cols(); ++j) {
      const bool close = std::abs(W_hat(i, j) - W(i, j)) < threshold;
      if (W(i, j) != 0) {
        close ? ++r.true_pos : ++r.false_neg;
      } else {
        close ? ++r.true_neg : ++r.false_pos;
      }
    }
  }
  return r;
}

}  // namespace graphident
