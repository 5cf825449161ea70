#pragma once

#include "cpinn/network.hpp"
#include "cpinn/random.hpp"

#include <Eigen/Core>

#include <cmath>

namespace cpinn::testing {

/// Small network with every parameter (biases included) drawn uniformly from
/// [-scale, scale], so derivative checks exercise all weights.
inline ControlPinnParams random_params(ArchitectureConfig arch, std::uint64_t seed, double scale = 0.6) {
  ControlPinnParams p(arch);
  CounterRng rng(seed, 900, 0);
  for (Eigen::Index i = 0; i < p.values().size(); ++i) p.values()(i) = rng.uniform(-scale, scale);
  return p;
}

inline ArchitectureConfig small_arch(int spatial_dim, int n_y, int n_u, int width = 8) {
  ArchitectureConfig a;
  a.spatial_dim = spatial_dim;
  a.n_y = n_y;
  a.n_u = n_u;
  a.width = width;
  a.trunk_layers = 2;
  a.control_layers = 2;
  a.adjoint_layers = 2;
  return a;
}

inline Eigen::VectorXd random_unit(Eigen::Index n, CounterRng& rng) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(-1.0, 1.0);
  return v / v.norm();
}

inline bool close_rel(double a, double b, double tol, double floor = 1e-8) {
  return std::abs(a - b) <= tol * std::max(std::abs(b), floor);
}

}  // namespace cpinn::testing
