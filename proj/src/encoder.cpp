#include "graphident/encoder.hpp"

#include <cmath>
#include <random>
#include <string>

#include "graphident/errors.hpp"
#include "graphident/graph.hpp"

namespace graphident {

std::size_t Mlp::parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : layers) count += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  return count;
}

namespace {

void check_stack(const std::vector<int>& widths, const char* name, bool allow_empty) {
  if (widths.empty() && allow_empty) return;
  if (widths.size() < 2) throw ConfigError(name, "needs at least an input and an output width");
  for (int w : widths) {
    if (w < 1) throw ConfigError(name, "layer widths must be positive");
  }
}

Mlp make_stack(const std::vector<int>& widths, Activation output, std::mt19937_64& rng) {
  Mlp mlp;
  mlp.widths = widths;
  mlp.output = output;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> unif(-bound, bound);
    DenseLayer layer;
    layer.weight.resize(fan_in, fan_out);
    // Row-major draw order so the stream does not depend on Eigen storage order.
    for (int r = 0; r < fan_in; ++r) {
      for (int c = 0; c < fan_out; ++c) layer.weight(r, c) = unif(rng);
    }
    layer.bias = Eigen::MatrixXd::Zero(1, fan_out);
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

ad::Var activate(const ad::Var& x, Activation act) {
  switch (act) {
    case Activation::Tanh:
      return ad::tanh(x);
    case Activation::Sigmoid:
      return ad::sigmoid(x);
    case Activation::Linear:
      break;
  }
  return x;
}

/// Applies a stack to the rows of x; `vars` points at its first weight.
ad::Var apply_stack(const Mlp& mlp, const std::vector<ad::Var>& vars, std::size_t& cursor, ad::Var x) {
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const ad::Var& weight = vars[cursor++];
    const ad::Var& bias = vars[cursor++];
    x = ad::matmul(x, weight) + bias;
    x = activate(x, l + 1 == mlp.layers.size() ? mlp.output : Activation::Tanh);
  }
  return x;
}

}  // namespace

void EncoderArchitecture::validate() const {
  check_stack(fc1, "fc1", false);
  check_stack(fc2, "fc2", true);
  check_stack(head, "head", false);
  if (fc1.back() != 1) throw ConfigError("fc1", "last width must be 1");
  if (!fc2.empty() && (fc2.front() != 1 || fc2.back() != 1)) throw ConfigError("fc2", "first and last widths must be 1");
  if (head.front() != 1 || head.back() != 1) throw ConfigError("head", "first and last widths must be 1");
  if (!(scale > 0) || !std::isfinite(scale)) throw ConfigError("scale", "must be a positive finite number");
}

EncoderArchitecture EncoderArchitecture::formation() { return {{2, 5, 10, 5, 1}, {1, 2, 1}, {1, 2, 1}, 5.0}; }

EncoderArchitecture EncoderArchitecture::flocking() { return {{2, 4, 4, 1}, {}, {1, 2, 1}, 3.0}; }

std::size_t EncoderParams::parameter_count() const {
  return fc1.parameter_count() + fc2.parameter_count() + head_alpha.parameter_count() + head_beta.parameter_count();
}

std::vector<Eigen::MatrixXd*> EncoderParams::tensors() {
  std::vector<Eigen::MatrixXd*> out;
  for (Mlp* mlp : {&fc1, &fc2, &head_alpha, &head_beta}) {
    for (auto& layer : mlp->layers) {
      out.push_back(&layer.weight);
      out.push_back(&layer.bias);
    }
  }
  return out;
}

std::vector<const Eigen::MatrixXd*> EncoderParams::tensors() const {
  std::vector<const Eigen::MatrixXd*> out;
  for (const Mlp* mlp : {&fc1, &fc2, &head_alpha, &head_beta}) {
    for (const auto& layer : mlp->layers) {
      out.push_back(&layer.weight);
      out.push_back(&layer.bias);
    }
  }
  return out;
}

bool EncoderParams::all_finite() const {
  for (const auto* t : tensors()) {
    if (!t->allFinite()) return false;
  }
  return std::isfinite(arch.scale);
}

EncoderParams init_params(const EncoderArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  std::mt19937_64 rng(seed);
  EncoderParams p;
  p.arch = arch;
  p.seed = seed;
  p.fc1 = make_stack(arch.fc1, Activation::Tanh, rng);
  p.fc2 = make_stack(arch.fc2, Activation::Linear, rng);
  p.head_alpha = make_stack(arch.head, Activation::Sigmoid, rng);
  p.head_beta = make_stack(arch.head, Activation::Sigmoid, rng);
  return p;
}

std::vector<ad::Var> parameter_vars(ad::Tape& tape, const EncoderParams& params, bool trainable) {
  std::vector<ad::Var> vars;
  for (const auto* t : params.tensors()) vars.push_back(trainable ? tape.variable(*t) : tape.constant(*t));
  return vars;
}

EncoderVars record_encoder(ad::Tape& tape, const EncoderParams& params, const std::vector<ad::Var>& param_vars,
                           const TrajectoryTensor& X) {
  const auto n = static_cast<Eigen::Index>(X.nodes());
  const auto s = static_cast<Eigen::Index>(X.state_dim());
  const auto d = static_cast<Eigen::Index>(X.window());
  if (s != params.arch.fc1.front()) {
    throw DimensionError("trajectory state dimension " + std::to_string(s) + " does not match encoder input width " +
                         std::to_string(params.arch.fc1.front()));
  }
  if (n < 2 || d < 1) throw DimensionError("encoder needs n >= 2 nodes and d >= 1 samples");
  if (param_vars.size() != params.tensors().size()) throw DimensionError("parameter variable count mismatch");

  // One row per (node, time) state, ordered so that the fc1 output column
  // reshapes directly into the n x d column-major feature matrix.
  Eigen::MatrixXd states(n * d, s);
  for (Eigen::Index t = 0; t < d; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index c = 0; c < s; ++c) {
        states(t * n + i, c) = X(static_cast<std::size_t>(i), static_cast<std::size_t>(c), static_cast<std::size_t>(t));
      }
    }
  }

  std::size_t cursor = 0;
  ad::Var h = apply_stack(params.fc1, param_vars, cursor, tape.constant(std::move(states)));
  const ad::Var projected = ad::reshape(h, n, d);

  const ad::Var scores = ad::scale(ad::matmul(projected, ad::transpose(projected)), 1.0 / std::sqrt(double(d)));
  const ad::Var attended = ad::matmul(ad::softmax_rows(scores), projected);

  ad::Var features = attended;
  if (!params.fc2.is_identity()) {
    const ad::Var refined = apply_stack(params.fc2, param_vars, cursor, ad::reshape(attended, n * d, 1));
    features = ad::reshape(refined, n, d);
  }

  const ad::Var distances = ad::pairwise_sq_dists(features);
  const ad::Var mean_distance = ad::mean(distances);

  const ad::Var log_alpha = ad::scale(apply_stack(params.head_alpha, param_vars, cursor, mean_distance), params.scale());
  const ad::Var neg_log_beta = ad::scale(apply_stack(params.head_beta, param_vars, cursor, mean_distance), params.scale());

  std::vector<Eigen::Index> upper;
  upper.reserve(static_cast<std::size_t>(edge_count(n)));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) upper.push_back(i + j * n);
  }

  return {features, distances, ad::gather(distances, std::move(upper)), ad::exp(log_alpha), ad::exp(-neg_log_beta)};
}

EncoderOutput encode(const TrajectoryTensor& X, const EncoderParams& params) {
  ad::Tape tape;
  const auto vars = parameter_vars(tape, params, false);
  const EncoderVars out = record_encoder(tape, params, vars, X);
  return {out.features.value(), out.distances.value(), out.alpha.scalar(), out.beta.scalar()};
}

}  // namespace graphident
