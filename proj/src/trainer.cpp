#include "graphident/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>

#include "graphident/errors.hpp"
#include "graphident/graph.hpp"
#include "graphident/seeding.hpp"

namespace graphident {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate", "must be >= 0");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1)) throw ConfigError("adam_beta1", "must lie in [0, 1)");
  if (!(adam_beta2 >= 0 && adam_beta2 < 1)) throw ConfigError("adam_beta2", "must lie in [0, 1)");
  if (!(adam_epsilon > 0)) throw ConfigError("adam_epsilon", "must be > 0");
  if (unroll_steps < 1) throw ConfigError("unroll_steps", "must be >= 1");
  if (total_steps < 0) throw ConfigError("total_steps", "must be >= 0");
  if (sample_refresh_period < 1) throw ConfigError("sample_refresh_period", "must be >= 1");
  if (retry_budget < 0) throw ConfigError("retry_budget", "must be >= 0");
}

TrainState TrainState::fresh(EncoderParams params) {
  TrainState s;
  for (const auto* t : params.tensors()) {
    s.adam_m.push_back(Eigen::MatrixXd::Zero(t->rows(), t->cols()));
    s.adam_v.push_back(Eigen::MatrixXd::Zero(t->rows(), t->cols()));
  }
  s.params = std::move(params);
  return s;
}

double graph_loss(const Eigen::VectorXd& w, const Eigen::VectorXd& w_hat, Eigen::Index n) {
  if (w.size() != w_hat.size() || w.size() != edge_count(n)) throw DimensionError("graph_loss: length mismatch");
  const Eigen::VectorXd adj = half_vectorize(adjoint(devectorize(w, n)));
  const Eigen::VectorXd adj_hat = half_vectorize(adjoint(devectorize(w_hat, n)));
  return (w - w_hat).cwiseAbs().sum() + (adj - adj_hat).cwiseAbs().sum();
}

ad::Var record_graph_loss(const ad::Var& w, const Eigen::VectorXd& w_hat, Eigen::Index n) {
  if (w.rows() != w_hat.size() || w.cols() != 1 || w_hat.size() != edge_count(n)) {
    throw DimensionError("graph_loss: length mismatch");
  }
  ad::Tape& tape = w.tape();
  const Eigen::MatrixXd W = devectorize(w.value().col(0), n);

  // Symmetrized adjoint at a zero edge (i, j): (deg_i / free_i + deg_j / free_j) / 2.
  Eigen::VectorXi free_slots = Eigen::VectorXi::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && W(i, j) == 0.0) ++free_slots(i);
    }
  }
  Eigen::MatrixXd spread = Eigen::MatrixXd::Zero(edge_count(n), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (W(i, j) != 0.0) continue;
      const Eigen::Index e = edge_index(i, j, n);
      spread(e, i) = 0.5 / free_slots(i);
      spread(e, j) = 0.5 / free_slots(j);
    }
  }

  const Eigen::VectorXd adj_hat = half_vectorize(adjoint(devectorize(w_hat, n)));
  const ad::Var degrees = ad::matmul(tape.constant(sum_operator(n)), w);
  const ad::Var adj = ad::matmul(tape.constant(std::move(spread)), degrees);
  return ad::sum(ad::abs(w - tape.constant(w_hat))) + ad::sum(ad::abs(adj - tape.constant(adj_hat)));
}

UnrolledSolve record_unrolled_identify(ad::Tape& tape, const EncoderParams& params,
                                       const std::vector<ad::Var>& param_vars, const TrajectoryTensor& X,
                                       int unroll_steps, const DualState& state) {
  if (unroll_steps < 1) throw DomainError("unroll_steps must be >= 1");
  const auto n = static_cast<Eigen::Index>(X.nodes());
  if (state.lambda.size() != n) throw DimensionError("dual state does not match node count");

  UnrolledSolve out{record_encoder(tape, params, param_vars, X), {}, state};
  const ad::Var& y = out.encoded.distance_vector;
  const ad::Var& alpha = out.encoded.alpha;
  const ad::Var& beta = out.encoded.beta;

  const Eigen::MatrixXd S = sum_operator(n);
  const ad::Var S_op = tape.constant(S);
  const ad::Var S_adj = tape.constant(S.transpose());
  const ad::Var lip = ad::div(tape.constant(static_cast<double>(n - 1)), beta);
  const ad::Var two_beta = ad::scale(beta, 2.0);
  const ad::Var barrier = ad::mul(ad::scale(alpha, 4.0), lip);
  const ad::Var two_y = ad::scale(y, 2.0);

  ad::Var omega = tape.constant(state.omega);
  ad::Var lambda_prev = tape.constant(state.lambda_prev);
  ad::Var lambda = lambda_prev;
  double tau = state.tau;
  ad::Var w;
  for (int k = 0; k < unroll_steps; ++k) {
    w = ad::relu(ad::div(ad::matmul(S_adj, omega) - two_y, two_beta));
    const ad::Var deg = ad::matmul(S_op, w);
    const ad::Var v = deg - ad::mul(lip, omega);
    const ad::Var u = ad::scale(v + ad::sqrt(ad::square(v) + barrier), 0.5);
    lambda = omega - ad::div(deg - u, lip);
    const double tau_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tau * tau));
    omega = lambda + ad::scale(lambda - lambda_prev, (tau - 1.0) / tau_next);
    lambda_prev = lambda;
    tau = tau_next;
    if (!w.value().allFinite() || !omega.value().allFinite()) {
      throw NumericalError("non-finite iterate in unrolled solve", state.iter + k);
    }
  }

  out.w = w;
  out.state.lambda = lambda.value();
  out.state.lambda_prev = lambda.value();
  out.state.omega = omega.value();
  out.state.tau = tau;
  out.state.iter = state.iter + unroll_steps;
  return out;
}

Eigen::VectorXd unrolled_identify(const TrajectoryTensor& X, const EncoderParams& params, int unroll_steps,
                                  std::uint64_t solver_seed) {
  ad::Tape tape;
  const auto vars = parameter_vars(tape, params, false);
  const auto solve = record_unrolled_identify(tape, params, vars, X, unroll_steps,
                                              DualState::initial(static_cast<Eigen::Index>(X.nodes()), solver_seed));
  return solve.w.value().col(0);
}

bool adam_update(TrainState& state, const std::vector<Eigen::MatrixXd>& grads, const TrainConfig& cfg) {
  auto tensors = state.params.tensors();
  if (grads.size() != tensors.size()) throw DimensionError("adam_update: gradient count mismatch");
  double sq_norm = 0.0;
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (grads[k].rows() != tensors[k]->rows() || grads[k].cols() != tensors[k]->cols()) {
      throw DimensionError("adam_update: gradient shape mismatch");
    }
    if (!grads[k].allFinite()) return false;
    sq_norm += grads[k].squaredNorm();
  }
  const double norm = std::sqrt(sq_norm);
  const double clip = (cfg.clip_norm > 0 && norm > cfg.clip_norm) ? cfg.clip_norm / norm : 1.0;

  const long t = state.step + 1;
  const double correction1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < grads.size(); ++k) {
    const Eigen::ArrayXXd g = grads[k].array() * clip;
    state.adam_m[k] = cfg.adam_beta1 * state.adam_m[k].array() + (1.0 - cfg.adam_beta1) * g;
    state.adam_v[k] = cfg.adam_beta2 * state.adam_v[k].array() + (1.0 - cfg.adam_beta2) * g.square();
    const Eigen::ArrayXXd m_hat = state.adam_m[k].array() / correction1;
    const Eigen::ArrayXXd v_hat = state.adam_v[k].array() / correction2;
    tensors[k]->array() -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
  }
  state.step = t;
  return true;
}

std::size_t pick_record(long step, std::size_t dataset_size, const TrainConfig& cfg) {
  if (dataset_size == 0) throw DomainError("empty dataset");
  const auto block = static_cast<std::uint64_t>(step / cfg.sample_refresh_period);
  if (cfg.policy == SamplePolicy::Sequential) return static_cast<std::size_t>(block % dataset_size);
  std::mt19937_64 rng(derive_seed({cfg.seed, block}));
  std::uniform_int_distribution<std::size_t> pick(0, dataset_size - 1);
  return pick(rng);
}

MetricsRow train_step(TrainState& state, const SampleRecord& record, std::int64_t record_index,
                      const TrainConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(record.X.nodes());
  const bool new_sample = state.active_graph != record.meta.graph_id || state.dual.lambda.size() != n;
  if (new_sample) {
    state.dual = DualState::initial(n, derive_seed({cfg.seed, static_cast<std::uint64_t>(record.meta.graph_id)}));
    state.active_graph = record.meta.graph_id;
  }
  state.active_record = record_index;

  ad::Tape tape;
  const auto vars = parameter_vars(tape, state.params, true);
  UnrolledSolve solve = record_unrolled_identify(tape, state.params, vars, record.X, cfg.unroll_steps, state.dual);
  const ad::Var loss = record_graph_loss(solve.w, half_vectorize(record.W), n);
  if (!std::isfinite(loss.scalar())) throw NumericalError("non-finite training loss", state.step);
  tape.backward(loss);

  std::vector<Eigen::MatrixXd> grads;
  grads.reserve(vars.size());
  for (const auto& v : vars) grads.push_back(v.grad());

  MetricsRow row;
  row.loss = loss.scalar();
  row.mae = mae(devectorize(solve.w.value().col(0), n), record.W);
  row.alpha = solve.encoded.alpha.scalar();
  row.beta = solve.encoded.beta.scalar();
  row.sample_id = record_index;

  if (!adam_update(state, grads, cfg)) {
    std::cerr << "warning: non-finite gradient at step " << state.step << ", update rejected\n";
    throw NumericalError("non-finite gradient", state.step);
  }
  state.dual = std::move(solve.state);
  row.step = state.step;
  return row;
}

namespace {

void run_loop(const std::function<std::pair<const SampleRecord*, std::int64_t>(long)>& next, const TrainConfig& cfg,
              TrainState& state, const MetricsSink& sink) {
  const long target = state.step + cfg.total_steps;
  const auto t0 = std::chrono::steady_clock::now();
  int failures = 0;
  while (state.step < target) {
    const auto [record, index] = next(state.step);
    MetricsRow row;
    try {
      row = train_step(state, *record, index, cfg);
      failures = 0;
    } catch (const NumericalError& e) {
      if (++failures > cfg.retry_budget) throw;
      std::cerr << "warning: training step failed (" << e.what() << "), restarting solver state\n";
      state.active_graph = -1;
      continue;
    }
    row.wallclock_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (sink) sink(row);
  }
}

}  // namespace

void train(std::span<const SampleRecord> dataset, const TrainConfig& cfg, TrainState& state, const MetricsSink& sink) {
  cfg.validate();
  if (dataset.empty()) throw DomainError("training needs a non-empty dataset");
  run_loop(
      [&](long step) {
        const std::size_t idx = pick_record(step, dataset.size(), cfg);
        return std::pair{&dataset[idx], static_cast<std::int64_t>(idx)};
      },
      cfg, state, sink);
}

void train(const RecordStream& stream, const TrainConfig& cfg, TrainState& state, const MetricsSink& sink) {
  cfg.validate();
  SampleRecord current;
  long current_step = -1;
  run_loop(
      [&](long step) {
        if (step != current_step) {
          current = stream(step);
          current_step = step;
        }
        return std::pair{static_cast<const SampleRecord*>(&current), current.meta.window_index};
      },
      cfg, state, sink);
}

MetricsCsv::MetricsCsv(const std::string& path, bool append, bool record_wallclock)
    : path_(path), record_wallclock_(record_wallclock) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw IoError("cannot open metrics file " + path);
  if (!append || out.tellp() == 0) out << "step,loss,mae,alpha,beta,sample_id,wallclock_ms\n";
}

void MetricsCsv::operator()(const MetricsRow& row) {
  std::ofstream out(path_, std::ios::app);
  if (!out) throw IoError("cannot append to metrics file " + path_);
  out << std::setprecision(17) << row.step << ',' << row.loss << ',' << row.mae << ',' << row.alpha << ','
      << row.beta << ',' << row.sample_id << ',' << (record_wallclock_ ? row.wallclock_ms : 0.0) << '\n';
}

}  // namespace graphident
