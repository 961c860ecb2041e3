#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "graphident/tensor.hpp"

namespace graphident {

/// Where a record came from. Records sharing a graph_id share ground truth
/// dynamics; the trainer keeps its solver state while graph_id is unchanged.
struct RecordMeta {
  std::int64_t graph_id = 0;
  std::int64_t window_index = 0;
  std::uint64_t seed = 0;
};

struct SampleRecord {
  TrajectoryTensor X;
  Eigen::MatrixXd W;
  RecordMeta meta;
};

struct FormationSpec {
  int n = 20;
  double p = 0.2;
  double sigma = 0.1;
  int d = 2000;        ///< samples per window
  int windows = 20;    ///< signal windows drawn on the single graph
  std::uint64_t seed = 1;

  void validate() const;
};

struct FlockingSpec {
  int n = 20;
  double rho = 0.7;         ///< desired inter-robot distance (m)
  double r_comm = 1.2;      ///< communication radius (m)
  double duration = 6.0;    ///< s
  double dt = 0.04;         ///< s
  double spawn_side = 5.0;  ///< robots spawn uniformly in [-side/2, side/2]^2 (m)
  double goal_x = 0.0;
  double goal_y = 0.0;
  double epsilon = 0.1;     ///< sigma-norm smoothing
  double a = 5.0;           ///< action function, attraction side
  double b = 5.0;           ///< action function, repulsion side
  double h = 0.2;           ///< bump function plateau
  double c1 = 0.4;          ///< goal position gain
  double c2 = 0.8;          ///< goal velocity gain
  int d = 10;               ///< window length
  int runs = 1;             ///< independent simulations when building a dataset
  std::uint64_t seed = 1;

  void validate() const;
  int steps() const;
};

/// i.i.d. Bernoulli(p) edges of unit weight over the n(n-1)/2 node pairs.
Eigen::MatrixXd sample_er_graph(int n, double p, std::uint64_t seed);

/// Pseudoinverse of the Laplacian of W; eigenvalues below 1e-10 count as zero.
Eigen::MatrixXd laplacian_pseudoinverse(const Eigen::MatrixXd& W);

/// Symmetric square root of L^+ + sigma I.
Eigen::MatrixXd smooth_signal_sqrt_covariance(const Eigen::MatrixXd& W, double sigma);

/// Two independent coordinates, each column x(t) ~ N(0, L^+ + sigma I).
TrajectoryTensor sample_smooth_signals(const Eigen::MatrixXd& W, double sigma, int d, std::uint64_t seed);

/// Same, with a precomputed covariance square root.
TrajectoryTensor sample_gaussian_signals(const Eigen::MatrixXd& sqrt_cov, int s, int d, std::uint64_t seed);

/// One graph and `spec.windows` signal windows on it.
std::vector<SampleRecord> generate_formation(const FormationSpec& spec);

/// The graph of a formation spec with windows drawn on demand; window(k)
/// equals the k-th record of generate_formation for any k >= 0.
class FormationSource {
 public:
  explicit FormationSource(const FormationSpec& spec);
  const Eigen::MatrixXd& graph() const { return W_; }
  SampleRecord window(std::int64_t k) const;

 private:
  FormationSpec spec_;
  Eigen::MatrixXd W_;
  Eigen::MatrixXd root_;
};

struct FlockingRun {
  TrajectoryTensor positions;          ///< n x 2 x T
  std::vector<Eigen::MatrixXd> graphs; ///< instantaneous bump-function adjacency, one per step
};

/// Flocking protocol of gradient-based alpha-agents with a goal tracking term:
///   u_i = sum_{j in N_i} phi_alpha(||q_j - q_i||_sigma) n_ij
///       + sum_{j in N_i} a_ij (p_j - p_i)
///       - c1 (q_i - goal) - c2 p_i
/// with sigma-norm parameter epsilon, bump plateau h, action function phi
/// shaped by (a, b), and N_i the robots closer than r_comm. Integrated with
/// semi-implicit Euler; the first recorded sample is the spawn configuration.
FlockingRun simulate_flocking(const FlockingSpec& spec);

/// Same, starting from explicit n x 2 positions instead of a random spawn.
FlockingRun simulate_flocking(const FlockingSpec& spec, const Eigen::MatrixX2d& initial_positions);

/// Non-overlapping windows of length d; each ground truth is the mean of the
/// d instantaneous graphs in its window. A trailing remainder is dropped.
std::vector<SampleRecord> window_trajectories(const TrajectoryTensor& traj, const std::vector<Eigen::MatrixXd>& graphs,
                                              int d, std::int64_t graph_id_base = 0);

/// Windows from `spec.runs` simulations with consecutive seeds.
std::vector<SampleRecord> generate_flocking(const FlockingSpec& spec);

}  // namespace graphident
