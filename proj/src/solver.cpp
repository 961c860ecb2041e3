#include "graphident/solver.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Cholesky>

#include "graphident/errors.hpp"
#include "graphident/graph.hpp"

namespace graphident {

void SolverConfig::validate() const {
  if (!(alpha > 0)) throw ConfigError("alpha", "must be > 0");
  if (!(beta > 0)) throw ConfigError("beta", "must be > 0");
  if (max_iters < 1) throw ConfigError("max_iters", "must be >= 1");
  if (!(tol > 0)) throw ConfigError("tol", "must be > 0");
}

DualState DualState::initial(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  DualState s;
  s.lambda.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) s.lambda(i) = unif(rng);
  s.lambda_prev = s.lambda;
  s.omega = s.lambda;
  return s;
}

namespace {

void check_inputs(const Eigen::VectorXd& y, Eigen::Index n) {
  if (n < 2) throw DomainError("graph identification needs n >= 2");
  if (y.size() != edge_count(n)) throw DimensionError("distance vector length does not match n(n-1)/2");
  if ((y.array() < 0).any()) throw DomainError("distances must be nonnegative");
}

}  // namespace

Eigen::VectorXd dual_step(DualState& state, const Eigen::VectorXd& y, Eigen::Index n, double alpha, double beta,
                          double* relative_step) {
  const double lip = static_cast<double>(n - 1) / beta;

  Eigen::VectorXd w = ((apply_sum_operator_transpose(state.omega) - 2.0 * y) / (2.0 * beta)).cwiseMax(0.0);
  const Eigen::VectorXd deg = apply_sum_operator(w, n);
  const Eigen::ArrayXd v = (deg - lip * state.omega).array();
  const Eigen::VectorXd u = (0.5 * (v + (v.square() + 4.0 * alpha * lip).sqrt())).matrix();

  state.lambda = state.omega - (deg - u) / lip;
  const double tau_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * state.tau * state.tau));
  state.omega = state.lambda + ((state.tau - 1.0) / tau_next) * (state.lambda - state.lambda_prev);

  if (relative_step != nullptr) {
    const double prev_norm = state.lambda_prev.norm();
    *relative_step = prev_norm == 0.0 ? std::numeric_limits<double>::infinity()
                                      : (state.lambda - state.lambda_prev).norm() / prev_norm;
  }
  state.lambda_prev = state.lambda;
  state.tau = tau_next;
  ++state.iter;

  if (!w.allFinite() || !state.omega.allFinite()) {
    throw NumericalError("non-finite iterate in dual solver", state.iter - 1);
  }
  return w;
}

SolveResult identify_graph(const Eigen::VectorXd& y, Eigen::Index n, const SolverConfig& cfg) {
  DualState state = DualState::initial(n, cfg.seed);
  return identify_graph(y, n, cfg, state);
}

SolveResult identify_graph(const Eigen::VectorXd& y, Eigen::Index n, const SolverConfig& cfg, DualState& state) {
  cfg.validate();
  check_inputs(y, n);
  if (state.lambda.size() != n) throw DimensionError("dual state does not match node count");

  SolveResult result;
  for (long k = 0; k < cfg.max_iters; ++k) {
    double step = 0.0;
    result.w = dual_step(state, y, n, cfg.alpha, cfg.beta, &step);
    result.iters_run = k + 1;
    result.final_relative_step = step;
    if (step < cfg.tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

double objective(const Eigen::VectorXd& w, const Eigen::VectorXd& y, Eigen::Index n, double alpha, double beta) {
  if (w.size() != edge_count(n) || y.size() != w.size()) throw DimensionError("objective: length mismatch");
  const Eigen::VectorXd deg = apply_sum_operator(w, n);
  if ((deg.array() <= 0).any()) return std::numeric_limits<double>::infinity();
  return 2.0 * w.dot(y) + beta * w.squaredNorm() - alpha * deg.array().log().sum();
}

namespace {

struct BarrierProblem {
  const Eigen::VectorXd& y;
  Eigen::Index n;
  double alpha;
  double beta;
  Eigen::MatrixXd S;

  double value(const Eigen::VectorXd& w, double mu) const {
    if ((w.array() <= 0).any()) return std::numeric_limits<double>::infinity();
    const double f = objective(w, y, n, alpha, beta);
    return f - mu * w.array().log().sum();
  }
};

}  // namespace

Eigen::VectorXd reference_solve(const Eigen::VectorXd& y, Eigen::Index n, const SolverConfig& cfg) {
  cfg.validate();
  check_inputs(y, n);
  const Eigen::Index m = edge_count(n);
  BarrierProblem prob{y, n, cfg.alpha, cfg.beta, sum_operator(n)};

  // Start at the uniform minimizer of the y = 0 problem, which is strictly feasible.
  Eigen::VectorXd w = Eigen::VectorXd::Constant(m, std::sqrt(cfg.alpha / (cfg.beta * static_cast<double>(n - 1))));

  constexpr int kMaxNewton = 400;
  double mu = 1.0;
  while (true) {
    bool centered = false;
    for (int it = 0; it < kMaxNewton; ++it) {
      const Eigen::VectorXd deg = prob.S * w;
      const Eigen::VectorXd inv_deg = deg.cwiseInverse();
      const Eigen::VectorXd grad = 2.0 * y + 2.0 * cfg.beta * w - cfg.alpha * (prob.S.transpose() * inv_deg) -
                                   mu * w.cwiseInverse();
      Eigen::MatrixXd H = prob.S.transpose() * (cfg.alpha * inv_deg.cwiseAbs2()).asDiagonal() * prob.S;
      H.diagonal().array() += 2.0 * cfg.beta + mu * w.cwiseInverse().array().square();
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
      if (ldlt.info() != Eigen::Success) throw OracleError("reference_solve: Newton system factorization failed");
      const Eigen::VectorXd dir = ldlt.solve(-grad);
      const double decrement = -grad.dot(dir);
      if (!std::isfinite(decrement)) throw OracleError("reference_solve: non-finite Newton decrement");
      // half the decrement bounds the suboptimality on the current path point
      if (decrement < 1e-15 * (1.0 + std::abs(prob.value(w, mu)))) {
        centered = true;
        break;
      }

      // Stay strictly inside w > 0.
      double t = 1.0;
      for (Eigen::Index e = 0; e < m; ++e) {
        if (dir(e) < 0) t = std::min(t, -0.99 * w(e) / dir(e));
      }
      const double f0 = prob.value(w, mu);
      while (t > 1e-16) {
        const Eigen::VectorXd trial = w + t * dir;
        if (prob.value(trial, mu) <= f0 - 0.25 * t * decrement) break;
        t *= 0.5;
      }
      if (t <= 1e-16) {
        centered = true;  // no further progress possible at double precision
        break;
      }
      w += t * dir;
    }
    if (!centered) throw OracleError("reference_solve: Newton iterations did not converge");
    if (mu < 1e-14) break;
    mu *= 0.1;
  }
  return w;
}

}  // namespace graphident
