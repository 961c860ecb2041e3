#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "graphident/autodiff.hpp"
#include "graphident/tensor.hpp"

namespace graphident {

enum class Activation { Tanh, Linear, Sigmoid };

/// Fully connected layer y = x * weight + bias applied to row vectors.
/// weight is fan_in x fan_out, bias is 1 x fan_out.
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::MatrixXd bias;
};

/// Stack of dense layers. Hidden layers use tanh; the last uses `output`.
/// An empty width list is the identity map.
struct Mlp {
  std::vector<int> widths;
  Activation output = Activation::Tanh;
  std::vector<DenseLayer> layers;

  bool is_identity() const { return layers.empty(); }
  std::size_t parameter_count() const;
};

/// Layer widths and head scale of an encoder.
struct EncoderArchitecture {
  std::vector<int> fc1;   ///< per-state projection, first width = state dimension, last = 1
  std::vector<int> fc2;   ///< per-feature refinement after attention; empty = identity
  std::vector<int> head;  ///< alpha and beta heads, scalar in / scalar out
  double scale = 5.0;     ///< b: log(alpha) and -log(beta) lie in (0, b)

  void validate() const;
  /// fc1 [2,5,10,5,1], fc2 [1,2,1], heads [1,2,1], b = 5.
  static EncoderArchitecture formation();
  /// fc1 [2,4,4,1], identity fc2, heads [1,2,1], b = 3.
  static EncoderArchitecture flocking();
};

struct EncoderParams {
  EncoderArchitecture arch;
  std::uint64_t seed = 0;
  Mlp fc1;
  Mlp fc2;
  Mlp head_alpha;
  Mlp head_beta;

  double scale() const { return arch.scale; }
  std::size_t parameter_count() const;

  /// Every weight and bias matrix in the canonical order: fc1, fc2, head_alpha,
  /// head_beta; within a stack layer by layer, weight before bias.
  std::vector<Eigen::MatrixXd*> tensors();
  std::vector<const Eigen::MatrixXd*> tensors() const;

  bool all_finite() const;
};

/// Weights ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)] from `seed`, biases zero.
EncoderParams init_params(const EncoderArchitecture& arch, std::uint64_t seed);

struct EncoderOutput {
  Eigen::MatrixXd features;   ///< n x d
  Eigen::MatrixXd distances;  ///< n x n squared distances between feature rows
  double alpha = 0.0;
  double beta = 0.0;
};

/// Encoder forward pass recorded on a tape.
struct EncoderVars {
  ad::Var features;
  ad::Var distances;
  ad::Var distance_vector;  ///< half-vectorized distances, solver input y
  ad::Var alpha;
  ad::Var beta;
};

/// Records the encoder on `tape`. `param_vars` follows EncoderParams::tensors() order.
EncoderVars record_encoder(ad::Tape& tape, const EncoderParams& params, const std::vector<ad::Var>& param_vars,
                           const TrajectoryTensor& X);

/// Leaves for every parameter tensor, as variables or constants.
std::vector<ad::Var> parameter_vars(ad::Tape& tape, const EncoderParams& params, bool trainable);

EncoderOutput encode(const TrajectoryTensor& X, const EncoderParams& params);

}  // namespace graphident
