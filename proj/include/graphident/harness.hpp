#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "graphident/datagen.hpp"
#include "graphident/encoder.hpp"
#include "graphident/graph.hpp"
#include "graphident/solver.hpp"

namespace graphident {

/// Maps a trajectory window to an identified adjacency matrix.
using Identifier = std::function<Eigen::MatrixXd(const TrajectoryTensor&)>;

/// Encoder features and regularizers fed to a full solve (cfg.alpha and
/// cfg.beta are replaced by the encoder's outputs).
Eigen::MatrixXd identify_with_model(const TrajectoryTensor& X, const EncoderParams& params, SolverConfig cfg);

/// Fixed-(alpha, beta) solve on raw distances, once per state component;
/// the component graphs are averaged.
Eigen::MatrixXd identify_baseline(const TrajectoryTensor& X, const SolverConfig& cfg);

Identifier model_identifier(EncoderParams params, SolverConfig cfg = {});
Identifier baseline_identifier(SolverConfig cfg);

/// Runs fn(0..count-1) on up to `workers` threads.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

/// ER test sets: for every (n, p), `repetitions` fresh graphs with smooth signals.
struct FormationGrid {
  std::vector<int> ns{10, 20, 30};
  std::vector<double> ps{0.2};
  int repetitions = 20;
  int d = 2000;
  double sigma = 0.1;
  double threshold = 1e-5;
  std::uint64_t seed = 1000;

  void validate() const;
};

struct GridRow {
  int n = 0;
  double p = 0.0;
  int repetitions = 0;
  double mae_mean = 0.0;
  double mae_std = 0.0;
  EdgeRecovery recovery;   ///< summed over repetitions
};

/// The graph and signals of one grid cell repetition; deterministic in (grid.seed, n, p, rep).
SampleRecord grid_sample(const FormationGrid& grid, int n, double p, int rep);

/// Per-cell MAE statistics in grid order (n outer, p inner). `dump` receives
/// the first repetition of every cell as (n, p, W_hat, W).
std::vector<GridRow> evaluate_grid(
    const Identifier& identify, const FormationGrid& grid, int workers,
    const std::function<void(int, double, const Eigen::MatrixXd&, const Eigen::MatrixXd&)>& dump = {});

struct RecordResult {
  std::size_t index = 0;
  double density = 0.0;
  double mae = 0.0;
  EdgeRecovery recovery;
};

std::vector<RecordResult> evaluate_records(const Identifier& identify, const std::vector<SampleRecord>& records,
                                           double threshold, int workers);

/// Mean and population standard deviation.
std::pair<double, double> mean_std(const std::vector<double>& xs);

/// CSV rendering of grid results (header + one line per row).
std::string grid_csv(const std::vector<GridRow>& rows);
std::string records_csv(const std::vector<RecordResult>& rows);

}  // namespace graphident
