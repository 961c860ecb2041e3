#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "graphident/autodiff.hpp"
#include "graphident/datagen.hpp"
#include "graphident/encoder.hpp"
#include "graphident/solver.hpp"

namespace graphident {

/// How the trainer walks the dataset.
enum class SamplePolicy {
  Sequential,  ///< next record every refresh period (formation: fresh window, same graph)
  Uniform,     ///< uniformly random record every refresh period (flocking)
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int unroll_steps = 30;
  long total_steps = 10000;
  long sample_refresh_period = 1;
  SamplePolicy policy = SamplePolicy::Sequential;
  double clip_norm = 10.0;     ///< global gradient norm cap; <= 0 disables clipping
  int retry_budget = 3;        ///< consecutive failed steps tolerated before giving up
  std::uint64_t seed = 0;      ///< record picks and solver initialization

  void validate() const;
};

struct TrainState {
  EncoderParams params;
  std::vector<Eigen::MatrixXd> adam_m;
  std::vector<Eigen::MatrixXd> adam_v;
  long step = 0;
  DualState dual;
  std::int64_t active_record = -1;   ///< dataset index in use
  std::int64_t active_graph = -1;    ///< graph id the dual state belongs to

  static TrainState fresh(EncoderParams params);
};

/// sum |w - w_hat| + sum |vech(adj(w)) - vech(adj(w_hat))|, adjoints symmetrized.
double graph_loss(const Eigen::VectorXd& w, const Eigen::VectorXd& w_hat, Eigen::Index n);

/// Recorded form of graph_loss. The zero pattern of w is read from its
/// forward value, so the adjoint is linear in w on the recorded branch.
ad::Var record_graph_loss(const ad::Var& w, const Eigen::VectorXd& w_hat, Eigen::Index n);

struct UnrolledSolve {
  EncoderVars encoded;
  ad::Var w;           ///< final primal iterate
  DualState state;     ///< detached dual state after the unroll
};

/// Records the encoder followed by `unroll_steps` dual iterations that start
/// from `state`. alpha, beta and y come from the encoder.
UnrolledSolve record_unrolled_identify(ad::Tape& tape, const EncoderParams& params,
                                       const std::vector<ad::Var>& param_vars, const TrajectoryTensor& X,
                                       int unroll_steps, const DualState& state);

/// Plain-value convenience: fresh dual state from `solver_seed`, constant parameters.
Eigen::VectorXd unrolled_identify(const TrajectoryTensor& X, const EncoderParams& params, int unroll_steps,
                                  std::uint64_t solver_seed);

/// Bias-corrected Adam step with optional global-norm clipping. Returns false
/// and leaves the state untouched when a gradient is not finite.
bool adam_update(TrainState& state, const std::vector<Eigen::MatrixXd>& grads, const TrainConfig& cfg);

struct MetricsRow {
  long step = 0;
  double loss = 0.0;
  double mae = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  std::int64_t sample_id = 0;
  double wallclock_ms = 0.0;
};

using MetricsSink = std::function<void(const MetricsRow&)>;

/// One training step on `record`: unroll, loss, backward, Adam. The dual state
/// is reset whenever the record's graph differs from the previous one.
MetricsRow train_step(TrainState& state, const SampleRecord& record, std::int64_t record_index,
                      const TrainConfig& cfg);

/// Runs cfg.total_steps steps past state.step over `dataset`.
void train(std::span<const SampleRecord> dataset, const TrainConfig& cfg, TrainState& state,
           const MetricsSink& sink = {});

/// Supplies the record for a step; the returned meta.window_index is logged as sample_id.
using RecordStream = std::function<SampleRecord(long step)>;

/// Same loop with records produced on demand, e.g. a fresh formation window per step.
void train(const RecordStream& stream, const TrainConfig& cfg, TrainState& state, const MetricsSink& sink = {});

/// Index of the record used at `step` under the config's sampling policy.
std::size_t pick_record(long step, std::size_t dataset_size, const TrainConfig& cfg);

/// Writes metrics rows as CSV; `append` keeps existing rows and skips the header.
class MetricsCsv {
 public:
  MetricsCsv(const std::string& path, bool append, bool record_wallclock);
  void operator()(const MetricsRow& row);

 private:
  std::string path_;
  bool record_wallclock_;
};

}  // namespace graphident
