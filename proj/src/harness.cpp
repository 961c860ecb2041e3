#include "graphident/harness.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "graphident/errors.hpp"
#include "graphident/seeding.hpp"

namespace graphident {

Eigen::MatrixXd identify_with_model(const TrajectoryTensor& X, const EncoderParams& params, SolverConfig cfg) {
  const EncoderOutput enc = encode(X, params);
  cfg.alpha = enc.alpha;
  cfg.beta = enc.beta;
  const auto n = static_cast<Eigen::Index>(X.nodes());
  return devectorize(identify_graph(half_vectorize(enc.distances), n, cfg).w, n);
}

Eigen::MatrixXd identify_baseline(const TrajectoryTensor& X, const SolverConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(X.nodes());
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t c = 0; c < X.state_dim(); ++c) {
    const Eigen::VectorXd y = half_vectorize(distance_matrix(X.channel(c)));
    W += devectorize(identify_graph(y, n, cfg).w, n);
  }
  return W / static_cast<double>(X.state_dim());
}

Identifier model_identifier(EncoderParams params, SolverConfig cfg) {
  return [params = std::move(params), cfg](const TrajectoryTensor& X) { return identify_with_model(X, params, cfg); };
}

Identifier baseline_identifier(SolverConfig cfg) {
  return [cfg](const TrajectoryTensor& X) { return identify_baseline(X, cfg); };
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || count <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, count); ++t) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < count; k = next++) {
        try {
          fn(k);
        } catch (...) {
          const std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

void FormationGrid::validate() const {
  if (ns.empty()) throw ConfigError("ns", "must list at least one node count");
  for (int n : ns) {
    if (n < 2) throw ConfigError("ns", "node counts must be >= 2");
  }
  if (ps.empty()) throw ConfigError("ps", "must list at least one edge probability");
  for (double p : ps) {
    if (!(p > 0 && p < 1)) throw ConfigError("ps", "edge probabilities must lie in (0, 1)");
  }
  if (repetitions < 1) throw ConfigError("repetitions", "must be >= 1");
  if (d < 1) throw ConfigError("d", "must be >= 1");
  if (!(sigma > 0)) throw ConfigError("sigma", "must be > 0");
  if (!(threshold > 0)) throw ConfigError("threshold", "must be > 0");
}

SampleRecord grid_sample(const FormationGrid& grid, int n, double p, int rep) {
  const auto p_key = static_cast<std::uint64_t>(std::llround(p * 1e6));
  const std::uint64_t base = derive_seed({grid.seed, static_cast<std::uint64_t>(n), p_key,
                                          static_cast<std::uint64_t>(rep)});
  const Eigen::MatrixXd W = sample_er_graph(n, p, derive_seed({base, 1}));
  const std::uint64_t signal_seed = derive_seed({base, 2});
  return {sample_smooth_signals(W, grid.sigma, grid.d, signal_seed), W, {rep, 0, signal_seed}};
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

std::vector<GridRow> evaluate_grid(
    const Identifier& identify, const FormationGrid& grid, int workers,
    const std::function<void(int, double, const Eigen::MatrixXd&, const Eigen::MatrixXd&)>& dump) {
  grid.validate();
  struct Job {
    std::size_t cell;
    int n;
    double p;
    int rep;
  };
  std::vector<Job> jobs;
  std::size_t cell = 0;
  for (int n : grid.ns) {
    for (double p : grid.ps) {
      for (int r = 0; r < grid.repetitions; ++r) jobs.push_back({cell, n, p, r});
      ++cell;
    }
  }

  std::vector<double> maes(jobs.size());
  std::vector<EdgeRecovery> recs(jobs.size());
  std::vector<Eigen::MatrixXd> first_hat(cell), first_truth(cell);
  parallel_for(jobs.size(), workers, [&](std::size_t k) {
    const Job& job = jobs[k];
    const SampleRecord sample = grid_sample(grid, job.n, job.p, job.rep);
    const Eigen::MatrixXd W_hat = identify(sample.X);
    maes[k] = mae(W_hat, sample.W);
    recs[k] = edge_recovery(W_hat, sample.W, grid.threshold);
    if (job.rep == 0) {
      first_hat[job.cell] = W_hat;
      first_truth[job.cell] = sample.W;
    }
  });

  std::vector<GridRow> rows;
  for (std::size_t k = 0; k < jobs.size(); k += static_cast<std::size_t>(grid.repetitions)) {
    GridRow row;
    row.n = jobs[k].n;
    row.p = jobs[k].p;
    row.repetitions = grid.repetitions;
    std::vector<double> cell_maes(maes.begin() + static_cast<std::ptrdiff_t>(k),
                                  maes.begin() + static_cast<std::ptrdiff_t>(k + grid.repetitions));
    std::tie(row.mae_mean, row.mae_std) = mean_std(cell_maes);
    for (int r = 0; r < grid.repetitions; ++r) {
      const EdgeRecovery& e = recs[k + static_cast<std::size_t>(r)];
      row.recovery.true_pos += e.true_pos;
      row.recovery.false_pos += e.false_pos;
      row.recovery.false_neg += e.false_neg;
      row.recovery.true_neg += e.true_neg;
    }
    if (dump) dump(row.n, row.p, first_hat[jobs[k].cell], first_truth[jobs[k].cell]);
    rows.push_back(row);
  }
  return rows;
}

std::vector<RecordResult> evaluate_records(const Identifier& identify, const std::vector<SampleRecord>& records,
                                           double threshold, int workers) {
  std::vector<RecordResult> out(records.size());
  parallel_for(records.size(), workers, [&](std::size_t k) {
    const Eigen::MatrixXd W_hat = identify(records[k].X);
    out[k] = {k, edge_density(records[k].W), mae(W_hat, records[k].W), edge_recovery(W_hat, records[k].W, threshold)};
  });
  return out;
}

std::string grid_csv(const std::vector<GridRow>& rows) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "n,p,repetitions,mae_mean,mae_std,true_pos,false_pos,false_neg,true_neg\n";
  for (const auto& r : rows) {
    os << r.n << ',' << r.p << ',' << r.repetitions << ',' << r.mae_mean << ',' << r.mae_std << ','
       << r.recovery.true_pos << ',' << r.recovery.false_pos << ',' << r.recovery.false_neg << ','
       << r.recovery.true_neg << '\n';
  }
  return os.str();
}

std::string records_csv(const std::vector<RecordResult>& rows) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "record,density,mae,true_pos,false_pos,false_neg,true_neg\n";
  for (const auto& r : rows) {
    os << r.index << ',' << r.density << ',' << r.mae << ',' << r.recovery.true_pos << ',' << r.recovery.false_pos
       << ',' << r.recovery.false_neg << ',' << r.recovery.true_neg << '\n';
  }
  return os.str();
}

}  // namespace graphident
