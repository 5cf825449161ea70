#pragma once

#include "cpinn/problems.hpp"

#include <Eigen/Core>

#include <cstdint>

namespace cpinn {

struct SampleSizes {
  int interior = 1000;
  int initial = 200;
  int terminal = 200;
  int boundary = 200;
};

/// Position in the sampling stream: the master seed and the next epoch.
struct SamplerState {
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
};

/// Fresh collocation points for one epoch. Each matrix is
/// (1 + spatial_dim) x count with row 0 holding t.
struct CollocationBatch {
  Eigen::MatrixXd interior;
  Eigen::MatrixXd initial;
  Eigen::MatrixXd terminal;
  Eigen::MatrixXd boundary;
  std::uint64_t epoch = 0;
};

/// Uniform i.i.d. points on the interior, the t0 and tf slices and the
/// spatial boundary of `domain`, drawn from Philox substream `state.epoch`.
/// Advances `state.epoch` by one.
///
/// With no spatial dimensions the initial and terminal slices are single
/// points and the boundary set is empty. Boundary points pick a face with
/// probability proportional to its measure, so the boundary is sampled
/// uniformly by area.
CollocationBatch sample(const Domain& domain, const SampleSizes& sizes, SamplerState& state);

/// Point column as a Point value.
Point column_point(const Eigen::MatrixXd& points, Eigen::Index j);

}  // namespace cpinn
