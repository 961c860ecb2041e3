#include "run_config.hpp"

#include <fstream>

#include "graphident/errors.hpp"

namespace graphident::cli {

using nlohmann::json;

namespace {

const json& empty_object() {
  static const json empty = json::object();
  return empty;
}

}  // namespace

FieldReader::FieldReader(const json& object, std::string prefix) : object_(object), prefix_(std::move(prefix)) {
  if (!object_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "must be a JSON object");
}

FieldReader FieldReader::section(const std::string& key) {
  if (!object_.contains(key)) return FieldReader(empty_object(), path(key));
  seen_.insert(key);
  return FieldReader(object_.at(key), path(key));
}

void FieldReader::finish() const {
  for (const auto& item : object_.items()) {
    if (!seen_.count(item.key())) throw ConfigError(path(item.key()), "unknown field");
  }
}

void FieldReader::throw_type(const std::string& key) const {
  throw ConfigError(path(key), "has the wrong type (" + std::string(object_.at(key).type_name()) + ")");
}

json load_config(const std::optional<std::string>& path) {
  if (!path) return json::object();
  std::ifstream in(*path);
  if (!in) throw IoError("cannot open config " + *path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("config is not valid JSON: ") + e.what());
  }
}

FormationSpec formation_spec(const json& doc, bool full_scale) {
  FormationSpec s;
  if (full_scale) {
    s.n = 50;
    s.d = 10000;
  }
  FieldReader r(doc, "");
  r.read("n", s.n);
  r.read("p", s.p);
  r.read("sigma", s.sigma);
  r.read("d", s.d);
  r.read("windows", s.windows);
  r.read("seed", s.seed);
  r.finish();
  s.validate();
  return s;
}

FlockingSpec flocking_spec(const json& doc, bool full_scale) {
  FlockingSpec s;
  if (full_scale) s.runs = 50;
  FieldReader r(doc, "");
  r.read("n", s.n);
  r.read("rho", s.rho);
  r.read("r_comm", s.r_comm);
  r.read("duration", s.duration);
  r.read("dt", s.dt);
  r.read("spawn_side", s.spawn_side);
  r.read("goal_x", s.goal_x);
  r.read("goal_y", s.goal_y);
  r.read("epsilon", s.epsilon);
  r.read("a", s.a);
  r.read("b", s.b);
  r.read("h", s.h);
  r.read("c1", s.c1);
  r.read("c2", s.c2);
  r.read("d", s.d);
  r.read("runs", s.runs);
  r.read("seed", s.seed);
  r.finish();
  s.validate();
  return s;
}

namespace {

EncoderArchitecture read_architecture(FieldReader& r) {
  if (!r.has("architecture")) return EncoderArchitecture::formation();
  std::string preset;
  try {
    r.read("architecture", preset);
  } catch (const ConfigError&) {
    EncoderArchitecture arch = EncoderArchitecture::formation();
    FieldReader a = r.section("architecture");
    a.read("fc1", arch.fc1);
    a.read("fc2", arch.fc2);
    a.read("head", arch.head);
    a.read("scale", arch.scale);
    a.finish();
    return arch;
  }
  if (preset == "formation") return EncoderArchitecture::formation();
  if (preset == "flocking") return EncoderArchitecture::flocking();
  throw ConfigError("architecture", "must be \"formation\", \"flocking\" or an object");
}

}  // namespace

TrainRun train_run(const json& doc, bool full_scale) {
  TrainRun run;
  if (full_scale) run.train.total_steps = 150000;
  FieldReader r(doc, "");
  r.read("dataset", run.dataset);
  if (r.has("resume")) {
    std::string resume;
    r.read("resume", resume);
    run.resume = resume;
  }
  run.arch = read_architecture(r);
  r.read("init_seed", run.init_seed);
  r.read("learning_rate", run.train.learning_rate);
  r.read("adam_beta1", run.train.adam_beta1);
  r.read("adam_beta2", run.train.adam_beta2);
  r.read("adam_epsilon", run.train.adam_epsilon);
  r.read("unroll_steps", run.train.unroll_steps);
  r.read("total_steps", run.train.total_steps);
  r.read("sample_refresh_period", run.train.sample_refresh_period);
  r.read("clip_norm", run.train.clip_norm);
  r.read("retry_budget", run.train.retry_budget);
  r.read("seed", run.train.seed);
  r.read("timing", run.timing);
  std::string policy = "sequential";
  r.read("policy", policy);
  if (policy == "sequential") {
    run.train.policy = SamplePolicy::Sequential;
  } else if (policy == "uniform") {
    run.train.policy = SamplePolicy::Uniform;
  } else {
    throw ConfigError("policy", "must be \"sequential\" or \"uniform\"");
  }
  r.finish();
  run.arch.validate();
  run.train.validate();
  return run;
}

EvalRun eval_run(const json& doc, bool full_scale, bool baseline) {
  EvalRun run;
  if (full_scale) {
    run.grid.ns = {10, 20, 30, 40, 50, 60};
    run.grid.ps = {0.1, 0.2, 0.4};
    run.grid.d = 10000;
  }
  if (baseline) {
    run.solver.alpha = 0.2;
    run.solver.beta = 1e-4;
  }
  FieldReader r(doc, "");
  if (!baseline && r.has("checkpoint")) {
    std::string path;
    r.read("checkpoint", path);
    run.checkpoint = path;
  }
  if (r.has("dataset")) {
    std::string path;
    r.read("dataset", path);
    run.dataset = path;
  }
  r.read("dump_matrices", run.dump_matrices);
  if (baseline) {
    r.read("alpha", run.solver.alpha);
    r.read("beta", run.solver.beta);
  }
  FieldReader g = r.section("grid");
  g.read("ns", run.grid.ns);
  g.read("ps", run.grid.ps);
  g.read("repetitions", run.grid.repetitions);
  g.read("d", run.grid.d);
  g.read("sigma", run.grid.sigma);
  g.read("threshold", run.grid.threshold);
  g.read("seed", run.grid.seed);
  g.finish();
  FieldReader s = r.section("solver");
  s.read("max_iters", run.solver.max_iters);
  s.read("tol", run.solver.tol);
  s.read("seed", run.solver.seed);
  s.finish();
  r.finish();
  try {
    run.grid.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("grid." + e.field, std::string(e.what()).substr(e.field.size() + 2));
  }
  run.solver.validate();
  return run;
}

}  // namespace graphident::cli
