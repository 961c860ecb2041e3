#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "graphident/errors.hpp"

namespace graphident {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RowMajorMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Node state trajectories: n nodes, s state components, d time samples.
///
/// Storage is row-major over (node, component, time), i.e. element (i, c, t)
/// lives at `i*s*d + c*d + t`. This is also the on-disk payload order.
class TrajectoryTensor {
 public:
  using ChannelMap = Eigen::Map<const RowMajorMatrixXd, 0, Eigen::Stride<Eigen::Dynamic, 1>>;
  using MutableChannelMap = Eigen::Map<RowMajorMatrixXd, 0, Eigen::Stride<Eigen::Dynamic, 1>>;

  TrajectoryTensor() = default;
  TrajectoryTensor(std::size_t n, std::size_t s, std::size_t d)
      : n_(n), s_(s), d_(d), values_(n * s * d, 0.0) {}
  TrajectoryTensor(std::size_t n, std::size_t s, std::size_t d, std::vector<double> values)
      : n_(n), s_(s), d_(d), values_(std::move(values)) {
    if (values_.size() != n * s * d) {
      throw DimensionError("trajectory payload has " + std::to_string(values_.size()) +
                           " values, expected n*s*d = " + std::to_string(n * s * d));
    }
  }

  std::size_t nodes() const { return n_; }
  std::size_t state_dim() const { return s_; }
  std::size_t window() const { return d_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(std::size_t i, std::size_t c, std::size_t t) { return values_[(i * s_ + c) * d_ + t]; }
  double operator()(std::size_t i, std::size_t c, std::size_t t) const { return values_[(i * s_ + c) * d_ + t]; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  /// n x d view of state component `c`.
  ChannelMap channel(std::size_t c) const {
    return ChannelMap(values_.data() + c * d_, static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(d_),
                      Eigen::Stride<Eigen::Dynamic, 1>(static_cast<Eigen::Index>(s_ * d_), 1));
  }
  MutableChannelMap channel(std::size_t c) {
    return MutableChannelMap(values_.data() + c * d_, static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(d_),
                             Eigen::Stride<Eigen::Dynamic, 1>(static_cast<Eigen::Index>(s_ * d_), 1));
  }

  /// n x (s*d) view, each row the flattened trajectory of one node.
  Eigen::Map<const RowMajorMatrixXd> flattened() const {
    return {values_.data(), static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(s_ * d_)};
  }

  bool all_finite() const {
    for (double v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  /// Reorders nodes so that node i of the result is node perm[i] of this tensor.
  TrajectoryTensor permuted(const std::vector<std::size_t>& perm) const {
    TrajectoryTensor out(n_, s_, d_);
    const std::size_t row = s_ * d_;
    for (std::size_t i = 0; i < n_; ++i) {
      std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(perm[i] * row), row,
                  out.values_.begin() + static_cast<std::ptrdiff_t>(i * row));
    }
    return out;
  }

 private:
  std::size_t n_ = 0;
  std::size_t s_ = 0;
  std::size_t d_ = 0;
  std::vector<double> values_;
};

}  // namespace graphident
