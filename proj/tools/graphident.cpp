#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "graphident/checkpoint.hpp"
#include "graphident/dataset_io.hpp"
#include "graphident/errors.hpp"
#include "graphident/graph.hpp"
#include "graphident/harness.hpp"
#include "graphident/trainer.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace graphident;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kNumerical = 3, kIo = 4 };

enum class LogLevel { Quiet, Info, Debug };

LogLevel log_level() {
  const char* env = std::getenv("GRAPHIDENT_LOG");
  const std::string v = env ? env : "info";
  if (v == "quiet" || v == "error" || v == "0") return LogLevel::Quiet;
  if (v == "debug" || v == "2") return LogLevel::Debug;
  return LogLevel::Info;
}

void log(LogLevel level, const std::string& msg) {
  if (level <= log_level() && level != LogLevel::Quiet) std::cerr << "[graphident] " << msg << '\n';
}

struct Common {
  std::optional<std::string> config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  int workers = 1;
  bool full_scale = false;
};

void add_common(CLI::App& cmd, Common& c) {
  cmd.add_option("--config", c.config, "JSON configuration file");
  cmd.add_option("--out", c.out, "output directory")->capture_default_str();
  cmd.add_option("--seed", c.seed, "overrides the configured seed");
  cmd.add_option("--workers", c.workers, "worker threads for sweeps")->check(CLI::PositiveNumber)->capture_default_str();
  cmd.add_flag("--full-scale", c.full_scale, "full-size experiment defaults (long running)");
}

json config_with_seed(const Common& c, const char* seed_key) {
  json doc = cli::load_config(c.config);
  if (c.seed) {
    if (!doc.is_object()) throw ConfigError("<root>", "must be a JSON object");
    doc[seed_key] = *c.seed;
  }
  return doc;
}

fs::path out_dir(const Common& c) {
  fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string matrix_csv(const Eigen::MatrixXd& M) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) os << (j ? "," : "") << M(i, j);
    os << '\n';
  }
  return os.str();
}

json density_summary(const std::vector<SampleRecord>& records) {
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (const auto& r : records) {
    const double rho = edge_density(r.W);
    lo = std::min(lo, rho);
    hi = std::max(hi, rho);
    sum += rho;
  }
  const double mean = records.empty() ? 0.0 : sum / static_cast<double>(records.size());
  return {{"min", lo}, {"mean", mean}, {"max", hi}};
}

void emit_summary(const fs::path& dir, const json& summary) {
  const std::string text = summary.dump(2);
  std::cout << text << '\n';
  write_text(dir / "summary.json", text + "\n");
}

int gen_formation(const Common& c) {
  const FormationSpec spec = cli::formation_spec(config_with_seed(c, "seed"), c.full_scale);
  log(LogLevel::Info, "generating formation dataset n=" + std::to_string(spec.n));
  Dataset data;
  data.records = generate_formation(spec);
  data.spec = {{"kind", "formation"},          {"n", std::to_string(spec.n)},
               {"p", std::to_string(spec.p)},  {"sigma", std::to_string(spec.sigma)},
               {"d", std::to_string(spec.d)},  {"windows", std::to_string(spec.windows)},
               {"seed", std::to_string(spec.seed)}};
  const fs::path dir = out_dir(c);
  write_dataset((dir / "dataset.gid").string(), data);
  emit_summary(dir, {{"kind", "formation"},
                     {"n", spec.n},
                     {"p", spec.p},
                     {"sigma", spec.sigma},
                     {"d", spec.d},
                     {"samples", data.records.size()},
                     {"density", density_summary(data.records)},
                     {"dataset", (dir / "dataset.gid").string()}});
  return kOk;
}

int gen_flocking(const Common& c) {
  const FlockingSpec spec = cli::flocking_spec(config_with_seed(c, "seed"), c.full_scale);
  log(LogLevel::Info, "simulating " + std::to_string(spec.runs) + " flocking run(s) n=" + std::to_string(spec.n));
  Dataset data;
  data.records = generate_flocking(spec);
  data.spec = {{"kind", "flocking"},
               {"n", std::to_string(spec.n)},
               {"rho", std::to_string(spec.rho)},
               {"r_comm", std::to_string(spec.r_comm)},
               {"d", std::to_string(spec.d)},
               {"runs", std::to_string(spec.runs)},
               {"seed", std::to_string(spec.seed)}};
  const fs::path dir = out_dir(c);
  write_dataset((dir / "dataset.gid").string(), data);
  emit_summary(dir, {{"kind", "flocking"},
                     {"n", spec.n},
                     {"rho", spec.rho},
                     {"r_comm", spec.r_comm},
                     {"d", spec.d},
                     {"runs", spec.runs},
                     {"samples", data.records.size()},
                     {"density", density_summary(data.records)},
                     {"dataset", (dir / "dataset.gid").string()}});
  return kOk;
}

int train_cmd(const Common& c, const std::optional<std::string>& dataset_flag,
              const std::optional<std::string>& resume_flag, bool timing_flag) {
  cli::TrainRun run = cli::train_run(config_with_seed(c, "seed"), c.full_scale);
  if (dataset_flag) run.dataset = *dataset_flag;
  if (resume_flag) run.resume = *resume_flag;
  if (run.dataset.empty()) throw ConfigError("dataset", "a dataset path is required");
  if (!fs::exists(run.dataset)) throw IoError("dataset not found: " + run.dataset);

  const Dataset data = read_dataset(run.dataset);
  if (data.records.empty()) throw ConfigError("dataset", "contains no records");
  TrainState state = run.resume ? load_train_state(*run.resume) : TrainState::fresh(init_params(run.arch, run.init_seed));

  const fs::path dir = out_dir(c);
  const fs::path metrics = dir / "metrics.csv";
  const bool append = run.resume.has_value() && fs::exists(metrics);
  MetricsCsv sink(metrics.string(), append, run.timing || timing_flag);
  const long start = state.step;
  log(LogLevel::Info, "training " + std::to_string(run.train.total_steps) + " steps from step " +
                          std::to_string(start) + " on " + std::to_string(data.records.size()) + " records");
  const long every = std::max<long>(1, run.train.total_steps / 20);
  train(data.records, run.train, state, [&](const MetricsRow& row) {
    sink(row);
    if (row.step % every == 0) {
      std::ostringstream os;
      os << "step " << row.step << " loss " << row.loss << " mae " << row.mae << " alpha " << row.alpha << " beta "
         << row.beta;
      log(LogLevel::Debug, os.str());
    }
  });
  save_train_state((dir / "checkpoint.json").string(), state);
  std::cout << json{{"steps", state.step - start},
                    {"step", state.step},
                    {"checkpoint", (dir / "checkpoint.json").string()},
                    {"metrics", metrics.string()}}
                   .dump(2)
            << '\n';
  return kOk;
}

void check_node_state(const Dataset& data, const EncoderParams* params) {
  if (!params || data.records.empty()) return;
  const auto s = static_cast<int>(data.records.front().X.state_dim());
  if (s != params->arch.fc1.front()) {
    throw DimensionError("checkpoint expects state dimension " + std::to_string(params->arch.fc1.front()) +
                         ", dataset has " + std::to_string(s));
  }
}

int evaluate(const Common& c, const std::optional<std::string>& checkpoint_flag, bool baseline) {
  cli::EvalRun run = cli::eval_run(cli::load_config(c.config), c.full_scale, baseline);
  if (c.seed) run.grid.seed = *c.seed;
  if (checkpoint_flag) run.checkpoint = *checkpoint_flag;

  std::optional<EncoderParams> params;
  Identifier identify;
  if (baseline) {
    identify = baseline_identifier(run.solver);
  } else {
    if (!run.checkpoint) throw ConfigError("checkpoint", "a checkpoint path is required");
    params = load_params(*run.checkpoint);
    identify = model_identifier(*params, run.solver);
  }

  const fs::path dir = out_dir(c);
  const std::string stem = baseline ? "baseline" : "eval";
  if (run.dataset) {
    const Dataset data = read_dataset(*run.dataset);
    check_node_state(data, params ? &*params : nullptr);
    const auto rows = evaluate_records(identify, data.records, run.grid.threshold, c.workers);
    write_text(dir / (stem + "_records.csv"), records_csv(rows));
    if (run.dump_matrices && !data.records.empty()) {
      fs::create_directories(dir / "matrices");
      write_text(dir / "matrices" / (stem + "_record0_hat.csv"), matrix_csv(identify(data.records.front().X)));
      write_text(dir / "matrices" / (stem + "_record0_truth.csv"), matrix_csv(data.records.front().W));
    }
    std::cout << json{{"records", rows.size()}, {"report", (dir / (stem + "_records.csv")).string()}}.dump(2) << '\n';
    return kOk;
  }

  if (params && params->arch.fc1.front() != 2) {
    throw DimensionError("grid signals have state dimension 2, checkpoint expects " +
                         std::to_string(params->arch.fc1.front()));
  }
  std::function<void(int, double, const Eigen::MatrixXd&, const Eigen::MatrixXd&)> dump;
  if (run.dump_matrices) {
    fs::create_directories(dir / "matrices");
    dump = [&](int n, double p, const Eigen::MatrixXd& W_hat, const Eigen::MatrixXd& W) {
      std::ostringstream name;
      name << stem << "_n" << n << "_p" << p;
      write_text(dir / "matrices" / (name.str() + "_hat.csv"), matrix_csv(W_hat));
      write_text(dir / "matrices" / (name.str() + "_truth.csv"), matrix_csv(W));
    };
  }
  log(LogLevel::Info, "evaluating " + std::to_string(run.grid.ns.size() * run.grid.ps.size()) + " configurations x " +
                          std::to_string(run.grid.repetitions) + " repetitions");
  const auto rows = evaluate_grid(identify, run.grid, c.workers, dump);
  write_text(dir / (stem + ".csv"), grid_csv(rows));
  std::cout << json{{"rows", rows.size()}, {"report", (dir / (stem + ".csv")).string()}}.dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph identification from multi-dimensional node trajectories"};
  app.require_subcommand(1);

  Common gen_f, gen_k, tr, ev, bl;
  auto* cmd_gen_f = app.add_subcommand("gen-formation", "generate an ER formation dataset");
  add_common(*cmd_gen_f, gen_f);
  auto* cmd_gen_k = app.add_subcommand("gen-flocking", "simulate flocking and window the trajectories");
  add_common(*cmd_gen_k, gen_k);

  std::optional<std::string> dataset, resume, checkpoint;
  bool timing = false;
  auto* cmd_train = app.add_subcommand("train", "train the encoder on a dataset");
  add_common(*cmd_train, tr);
  cmd_train->add_option("--dataset", dataset, "dataset file (overrides config)");
  cmd_train->add_option("--resume", resume, "continue from a checkpoint; metrics are appended");
  cmd_train->add_flag("--timing", timing, "record wall-clock time in the metrics");

  auto* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint on a grid or dataset");
  add_common(*cmd_eval, ev);
  cmd_eval->add_option("--checkpoint", checkpoint, "checkpoint file (overrides config)");

  auto* cmd_base = app.add_subcommand("baseline", "fixed-parameter solve per state dimension");
  add_common(*cmd_base, bl);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*cmd_gen_f) return gen_formation(gen_f);
    if (*cmd_gen_k) return gen_flocking(gen_k);
    if (*cmd_train) return train_cmd(tr, dataset, resume, timing);
    if (*cmd_eval) return evaluate(ev, checkpoint, false);
    if (*cmd_base) return evaluate(bl, std::nullopt, true);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
