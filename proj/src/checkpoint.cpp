#include "graphident/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "graphident/errors.hpp"

namespace graphident {

namespace {

using nlohmann::json;

std::vector<double> flatten(const std::vector<const Eigen::MatrixXd*>& tensors) {
  std::vector<double> flat;
  for (const auto* t : tensors) {
    for (Eigen::Index r = 0; r < t->rows(); ++r) {
      for (Eigen::Index c = 0; c < t->cols(); ++c) flat.push_back((*t)(r, c));
    }
  }
  return flat;
}

void unflatten(const std::vector<double>& flat, const std::vector<Eigen::MatrixXd*>& tensors, const char* what) {
  std::size_t k = 0;
  std::size_t expected = 0;
  for (const auto* t : tensors) expected += static_cast<std::size_t>(t->size());
  if (flat.size() != expected) {
    throw IoError(std::string("checkpoint ") + what + " has " + std::to_string(flat.size()) + " values, expected " +
                  std::to_string(expected));
  }
  for (auto* t : tensors) {
    for (Eigen::Index r = 0; r < t->rows(); ++r) {
      for (Eigen::Index c = 0; c < t->cols(); ++c) (*t)(r, c) = flat[k++];
    }
  }
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json params_json(const EncoderParams& p) {
  json doc;
  doc["format"] = "graphident-checkpoint";
  doc["version"] = kCheckpointVersion;
  doc["architecture"] = {{"fc1", p.arch.fc1}, {"fc2", p.arch.fc2}, {"head", p.arch.head}, {"scale", p.arch.scale}};
  doc["seed"] = p.seed;
  doc["parameters"] = flatten(p.tensors());
  return doc;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("checkpoint is not valid JSON: ") + e.what(), e.byte);
  }
}

EncoderParams params_from_json(const json& doc) {
  try {
    if (doc.at("format") != "graphident-checkpoint") throw IoError("not a graphident checkpoint");
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw UnsupportedVersionError("unsupported checkpoint version " + std::to_string(version));
    }
    EncoderArchitecture arch;
    const json& a = doc.at("architecture");
    arch.fc1 = a.at("fc1").get<std::vector<int>>();
    arch.fc2 = a.at("fc2").get<std::vector<int>>();
    arch.head = a.at("head").get<std::vector<int>>();
    arch.scale = a.at("scale").get<double>();
    EncoderParams p = init_params(arch, doc.at("seed").get<std::uint64_t>());
    unflatten(doc.at("parameters").get<std::vector<double>>(), p.tensors(), "parameters");
    return p;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed checkpoint: ") + e.what());
  }
}

void write_json(const std::string& path, const json& doc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << doc.dump(1) << '\n';
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace

void save_params(const std::string& path, const EncoderParams& params) { write_json(path, params_json(params)); }

EncoderParams load_params(const std::string& path) { return params_from_json(read_json(path)); }

void save_train_state(const std::string& path, const TrainState& state) {
  json doc = params_json(state.params);
  std::vector<const Eigen::MatrixXd*> m, v;
  for (const auto& t : state.adam_m) m.push_back(&t);
  for (const auto& t : state.adam_v) v.push_back(&t);
  json trainer;
  trainer["step"] = state.step;
  trainer["adam_m"] = flatten(m);
  trainer["adam_v"] = flatten(v);
  trainer["active_graph"] = state.active_graph;
  trainer["active_record"] = state.active_record;
  trainer["dual"] = {{"lambda", to_vector(state.dual.lambda)},
                     {"lambda_prev", to_vector(state.dual.lambda_prev)},
                     {"omega", to_vector(state.dual.omega)},
                     {"tau", state.dual.tau},
                     {"iter", state.dual.iter}};
  doc["trainer"] = std::move(trainer);
  write_json(path, doc);
}

TrainState load_train_state(const std::string& path) {
  const json doc = read_json(path);
  TrainState state = TrainState::fresh(params_from_json(doc));
  if (!doc.contains("trainer")) return state;
  try {
    const json& t = doc.at("trainer");
    state.step = t.at("step").get<long>();
    std::vector<Eigen::MatrixXd*> m, v;
    for (auto& x : state.adam_m) m.push_back(&x);
    for (auto& x : state.adam_v) v.push_back(&x);
    unflatten(t.at("adam_m").get<std::vector<double>>(), m, "adam_m");
    unflatten(t.at("adam_v").get<std::vector<double>>(), v, "adam_v");
    state.active_graph = t.at("active_graph").get<std::int64_t>();
    state.active_record = t.at("active_record").get<std::int64_t>();
    const json& d = t.at("dual");
    state.dual.lambda = from_vector(d.at("lambda").get<std::vector<double>>());
    state.dual.lambda_prev = from_vector(d.at("lambda_prev").get<std::vector<double>>());
    state.dual.omega = from_vector(d.at("omega").get<std::vector<double>>());
    state.dual.tau = d.at("tau").get<double>();
    state.dual.iter = d.at("iter").get<long>();
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed trainer state in checkpoint: ") + e.what());
  }
  return state;
}

}  // namespace graphident
