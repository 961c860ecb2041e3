#include "graphident/datagen.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "graphident/errors.hpp"
#include "graphident/graph.hpp"
#include "graphident/seeding.hpp"

namespace graphident {

void FormationSpec::validate() const {
  if (n < 2) throw ConfigError("n", "must be >= 2");
  if (!(p > 0 && p < 1)) throw ConfigError("p", "must lie in (0, 1)");
  if (!(sigma > 0)) throw ConfigError("sigma", "must be > 0");
  if (d < 1) throw ConfigError("d", "must be >= 1");
  if (windows < 1) throw ConfigError("windows", "must be >= 1");
}

void FlockingSpec::validate() const {
  if (n < 1) throw ConfigError("n", "must be >= 1");
  if (!(rho > 0)) throw ConfigError("rho", "must be > 0");
  if (!(rho < r_comm)) throw ConfigError("rho", "must be smaller than r_comm");
  if (!(dt > 0)) throw ConfigError("dt", "must be > 0");
  if (!(duration >= dt)) throw ConfigError("duration", "must cover at least one step");
  if (!(spawn_side > 0)) throw ConfigError("spawn_side", "must be > 0");
  if (!(epsilon > 0)) throw ConfigError("epsilon", "must be > 0");
  if (!(a > 0) || !(b >= a)) throw ConfigError("b", "action function needs 0 < a <= b");
  if (!(h >= 0 && h < 1)) throw ConfigError("h", "must lie in [0, 1)");
  if (d < 1) throw ConfigError("d", "must be >= 1");
  if (runs < 1) throw ConfigError("runs", "must be >= 1");
}

int FlockingSpec::steps() const { return static_cast<int>(std::lround(duration / dt)); }

Eigen::MatrixXd sample_er_graph(int n, double p, std::uint64_t seed) {
  if (n < 1) throw DomainError("sample_er_graph: n must be >= 1");
  if (!(p >= 0 && p <= 1)) throw DomainError("sample_er_graph: p must lie in [0, 1]");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution edge(p);
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (edge(rng)) {
        W(i, j) = 1.0;
        W(j, i) = 1.0;
      }
    }
  }
  return W;
}

namespace {

constexpr double kPinvThreshold = 1e-10;

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> laplacian_spectrum(const Eigen::MatrixXd& W) {
  validate_adjacency(W, 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(laplacian(W));
  if (eig.info() != Eigen::Success) throw Error("Laplacian eigendecomposition failed");
  return eig;
}

Eigen::VectorXd pinv_eigenvalues(const Eigen::VectorXd& ev) {
  return ev.unaryExpr([](double x) { return x < kPinvThreshold ? 0.0 : 1.0 / x; });
}

}  // namespace

Eigen::MatrixXd laplacian_pseudoinverse(const Eigen::MatrixXd& W) {
  const auto eig = laplacian_spectrum(W);
  const Eigen::MatrixXd& V = eig.eigenvectors();
  return V * pinv_eigenvalues(eig.eigenvalues()).asDiagonal() * V.transpose();
}

Eigen::MatrixXd smooth_signal_sqrt_covariance(const Eigen::MatrixXd& W, double sigma) {
  if (!(sigma > 0)) throw DomainError("noise level sigma must be > 0");
  const auto eig = laplacian_spectrum(W);
  const Eigen::MatrixXd& V = eig.eigenvectors();
  const Eigen::VectorXd root = (pinv_eigenvalues(eig.eigenvalues()).array() + sigma).sqrt();
  return V * root.asDiagonal() * V.transpose();
}

TrajectoryTensor sample_gaussian_signals(const Eigen::MatrixXd& sqrt_cov, int s, int d, std::uint64_t seed) {
  const auto n = sqrt_cov.rows();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  TrajectoryTensor X(static_cast<std::size_t>(n), static_cast<std::size_t>(s), static_cast<std::size_t>(d));
  Eigen::MatrixXd z(n, d);
  for (int c = 0; c < s; ++c) {
    for (int t = 0; t < d; ++t) {
      for (Eigen::Index i = 0; i < n; ++i) z(i, t) = normal(rng);
    }
    X.channel(static_cast<std::size_t>(c)) = sqrt_cov * z;
  }
  return X;
}

TrajectoryTensor sample_smooth_signals(const Eigen::MatrixXd& W, double sigma, int d, std::uint64_t seed) {
  if (d < 1) throw DomainError("window length must be >= 1");
  return sample_gaussian_signals(smooth_signal_sqrt_covariance(W, sigma), 2, d, seed);
}

FormationSource::FormationSource(const FormationSpec& spec) : spec_(spec) {
  spec_.validate();
  W_ = sample_er_graph(spec_.n, spec_.p, derive_seed({spec_.seed, 0}));
  root_ = smooth_signal_sqrt_covariance(W_, spec_.sigma);
}

SampleRecord FormationSource::window(std::int64_t k) const {
  if (k < 0) throw DomainError("window index must be >= 0");
  const std::uint64_t s = derive_seed({spec_.seed, 1, static_cast<std::uint64_t>(k)});
  return {sample_gaussian_signals(root_, 2, spec_.d, s), W_, {0, k, s}};
}

std::vector<SampleRecord> generate_formation(const FormationSpec& spec) {
  const FormationSource source(spec);
  std::vector<SampleRecord> records;
  for (int k = 0; k < spec.windows; ++k) records.push_back(source.window(k));
  return records;
}

namespace {

struct FlockingKernel {
  const FlockingSpec& spec;
  double r_alpha;
  double d_alpha;
  double c_shift;

  explicit FlockingKernel(const FlockingSpec& s)
      : spec(s), r_alpha(sigma_norm(s.r_comm)), d_alpha(sigma_norm(s.rho)),
        c_shift(std::abs(s.a - s.b) / std::sqrt(4.0 * s.a * s.b)) {}

  double sigma_norm(double dist) const {
    return (std::sqrt(1.0 + spec.epsilon * dist * dist) - 1.0) / spec.epsilon;
  }

  double bump(double z) const {
    if (z < 0) return 0.0;
    if (z < spec.h) return 1.0;
    if (z <= 1.0) return 0.5 * (1.0 + std::cos(std::numbers::pi * (z - spec.h) / (1.0 - spec.h)));
    return 0.0;
  }

  double action(double z) const {
    const double x = z + c_shift;
    return 0.5 * ((spec.a + spec.b) * x / std::sqrt(1.0 + x * x) + (spec.a - spec.b));
  }
};

constexpr double kSpeedLimit = 1e3;

}  // namespace

FlockingRun simulate_flocking(const FlockingSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> spawn(-spec.spawn_side / 2.0, spec.spawn_side / 2.0);
  Eigen::MatrixX2d q(spec.n, 2);
  for (int i = 0; i < spec.n; ++i) {
    q(i, 0) = spawn(rng);
    q(i, 1) = spawn(rng);
  }
  return simulate_flocking(spec, q);
}

FlockingRun simulate_flocking(const FlockingSpec& spec, const Eigen::MatrixX2d& initial_positions) {
  spec.validate();
  if (initial_positions.rows() != spec.n) throw DimensionError("initial positions must have one row per robot");
  const FlockingKernel k(spec);
  const int n = spec.n;
  const int T = spec.steps();

  Eigen::MatrixX2d q = initial_positions;
  Eigen::MatrixX2d p = Eigen::MatrixX2d::Zero(n, 2);
  const Eigen::RowVector2d goal(spec.goal_x, spec.goal_y);

  FlockingRun run{TrajectoryTensor(static_cast<std::size_t>(n), 2, static_cast<std::size_t>(T)), {}};
  run.graphs.reserve(static_cast<std::size_t>(T));

  Eigen::MatrixXd W(n, n);
  Eigen::MatrixX2d u(n, 2);
  for (int t = 0; t < T; ++t) {
    W.setZero();
    u.setZero();
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const Eigen::RowVector2d diff = q.row(j) - q.row(i);
        const double dist = diff.norm();
        if (dist >= spec.r_comm) continue;
        const double z = k.sigma_norm(dist);
        const double aij = k.bump(z / k.r_alpha);
        W(i, j) = aij;
        W(j, i) = aij;
        const Eigen::RowVector2d n_ij = diff / std::sqrt(1.0 + spec.epsilon * dist * dist);
        const Eigen::RowVector2d force = aij * k.action(z - k.d_alpha) * n_ij;
        const Eigen::RowVector2d align = aij * (p.row(j) - p.row(i));
        u.row(i) += force + align;
        u.row(j) -= force + align;
      }
    }
    for (int i = 0; i < n; ++i) {
      run.positions(static_cast<std::size_t>(i), 0, static_cast<std::size_t>(t)) = q(i, 0);
      run.positions(static_cast<std::size_t>(i), 1, static_cast<std::size_t>(t)) = q(i, 1);
    }
    run.graphs.push_back(W);

    u -= spec.c1 * (q.rowwise() - goal) + spec.c2 * p;
    p += spec.dt * u;
    q += spec.dt * p;
    if (!p.allFinite() || p.rowwise().norm().maxCoeff() > kSpeedLimit) {
      throw NumericalError("flocking simulation diverged", t);
    }
  }
  return run;
}

std::vector<SampleRecord> window_trajectories(const TrajectoryTensor& traj, const std::vector<Eigen::MatrixXd>& graphs,
                                              int d, std::int64_t graph_id_base) {
  const auto T = static_cast<int>(traj.window());
  if (d < 1) throw DomainError("window length must be >= 1");
  if (d > T) throw DomainError("window length " + std::to_string(d) + " exceeds trajectory length " + std::to_string(T));
  if (graphs.size() != traj.window()) throw DimensionError("one graph per trajectory sample is required");

  const std::size_t n = traj.nodes();
  const std::size_t s = traj.state_dim();
  std::vector<SampleRecord> out;
  for (int w = 0; w + 1 <= T / d; ++w) {
    TrajectoryTensor X(n, s, static_cast<std::size_t>(d));
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (int t = 0; t < d; ++t) {
      const auto src = static_cast<std::size_t>(w * d + t);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < s; ++c) X(i, c, static_cast<std::size_t>(t)) = traj(i, c, src);
      }
      W += graphs[src];
    }
    W /= static_cast<double>(d);
    out.push_back({std::move(X), std::move(W), {graph_id_base + w, w, 0}});
  }
  return out;
}

std::vector<SampleRecord> generate_flocking(const FlockingSpec& spec) {
  spec.validate();
  std::vector<SampleRecord> records;
  const std::int64_t per_run = spec.steps() / spec.d;
  for (int r = 0; r < spec.runs; ++r) {
    FlockingSpec run_spec = spec;
    run_spec.seed = spec.seed + static_cast<std::uint64_t>(r);
    const FlockingRun run = simulate_flocking(run_spec);
    auto windows = window_trajectories(run.positions, run.graphs, spec.d, r * per_run);
    for (auto& rec : windows) {
      rec.meta.seed = run_spec.seed;
      records.push_back(std::move(rec));
    }
  }
  return records;
}

}  // namespace graphident
