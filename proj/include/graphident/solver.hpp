#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace graphident {

/// Regularization and stopping parameters for the dual solver.
struct SolverConfig {
  double alpha = 0.2;        ///< log-barrier weight, keeps degrees positive
  double beta = 1e-4;        ///< quadratic sparsity weight
  long max_iters = 2000;
  double tol = 1e-5;         ///< relative multiplier step that ends the iteration
  std::uint64_t seed = 0;    ///< multiplier initialization

  void validate() const;
  /// Lipschitz constant of the dual gradient, (n-1)/beta.
  double lipschitz(Eigen::Index n) const { return static_cast<double>(n - 1) / beta; }
};

/// Lagrange multipliers of the degree constraints plus the momentum sequence.
struct DualState {
  Eigen::VectorXd lambda;
  Eigen::VectorXd lambda_prev;
  Eigen::VectorXd omega;
  double tau = 1.0;
  long iter = 0;

  /// lambda = lambda_prev = omega ~ U[0,1)^n drawn from `seed`, tau = 1.
  static DualState initial(Eigen::Index n, std::uint64_t seed);
};

struct SolveResult {
  Eigen::VectorXd w;
  long iters_run = 0;
  bool converged = false;
  double final_relative_step = 0.0;
};

/// One accelerated dual proximal gradient iteration. Updates `state` in place
/// and returns the primal iterate w_k computed from the incoming omega.
/// The returned relative step is ||lambda_k - lambda_{k-1}|| / ||lambda_{k-1}||
/// (+inf when the previous multiplier is zero).
Eigen::VectorXd dual_step(DualState& state, const Eigen::VectorXd& y, Eigen::Index n, double alpha, double beta,
                          double* relative_step = nullptr);

/// Identifies edge weights from half-vectorized squared distances `y`.
SolveResult identify_graph(const Eigen::VectorXd& y, Eigen::Index n, const SolverConfig& cfg);

/// Same, continuing from a caller-owned dual state.
SolveResult identify_graph(const Eigen::VectorXd& y, Eigen::Index n, const SolverConfig& cfg, DualState& state);

/// 2 w^T y + beta ||w||^2 - alpha 1^T log(S w); +infinity when some degree is <= 0.
double objective(const Eigen::VectorXd& w, const Eigen::VectorXd& y, Eigen::Index n, double alpha, double beta);

/// Primal oracle for the same problem: damped Newton on a log-barrier path
/// for the w >= 0 constraint. Independent of the dual iteration.
Eigen::VectorXd reference_solve(const Eigen::VectorXd& y, Eigen::Index n, const SolverConfig& cfg);

}  // namespace graphident
