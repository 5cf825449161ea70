#include "cpinn/sampler.hpp"

#include "cpinn/random.hpp"

#include <limits>
#include <stdexcept>

namespace cpinn {

namespace {

enum Stream : std::uint32_t {
  kInterior = 16,
  kInitial = 17,
  kTerminal = 18,
  kBoundary = 19,
};

void fill_space(CounterRng& rng, const Domain& domain, Eigen::MatrixXd& points, Eigen::Index j) {
  for (int i = 0; i < domain.spatial_dim(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    points(1 + i, j) = rng.uniform(domain.lower[k], domain.upper[k]);
  }
}

}  // namespace

CollocationBatch sample(const Domain& domain, const SampleSizes& sizes, SamplerState& state) {
  domain.validate();
  if (sizes.interior <= 0 || sizes.initial <= 0 || sizes.terminal <= 0 || sizes.boundary <= 0) {
    throw std::invalid_argument("sample: every batch size must be positive");
  }
  if (state.epoch > std::numeric_limits<std::uint32_t>::max()) {
    throw std::overflow_error("sample: epoch counter exhausted");
  }
  const int d = domain.spatial_dim();
  const auto substream = static_cast<std::uint32_t>(state.epoch);
  CollocationBatch batch;
  batch.epoch = state.epoch;

  {
    CounterRng rng(state.seed, kInterior, substream);
    batch.interior.resize(1 + d, sizes.interior);
    for (Eigen::Index j = 0; j < sizes.interior; ++j) {
      batch.interior(0, j) = rng.uniform(domain.t0, domain.tf);
      fill_space(rng, domain, batch.interior, j);
    }
  }

  auto slice = [&](double t, int count, std::uint32_t stream) {
    const int n = d == 0 ? 1 : count;
    Eigen::MatrixXd pts(1 + d, n);
    CounterRng rng(state.seed, stream, substream);
    for (Eigen::Index j = 0; j < n; ++j) {
      pts(0, j) = t;
      fill_space(rng, domain, pts, j);
    }
    return pts;
  };
  batch.initial = slice(domain.t0, sizes.initial, kInitial);
  batch.terminal = slice(domain.tf, sizes.terminal, kTerminal);

  if (d == 0) {
    batch.boundary.resize(1, 0);
  } else {
    // face measure = product of the other side lengths
    std::vector<double> cumulative;
    double total = 0.0;
    for (int face = 0; face < 2 * d; ++face) {
      double measure = 1.0;
      for (int i = 0; i < d; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (i != face / 2) measure *= domain.upper[k] - domain.lower[k];
      }
      total += measure;
      cumulative.push_back(total);
    }
    CounterRng rng(state.seed, kBoundary, substream);
    batch.boundary.resize(1 + d, sizes.boundary);
    for (Eigen::Index j = 0; j < sizes.boundary; ++j) {
      const double pick = rng.uniform() * total;
      int face = 0;
      while (face + 1 < 2 * d && pick >= cumulative[static_cast<std::size_t>(face)]) ++face;
      batch.boundary(0, j) = rng.uniform(domain.t0, domain.tf);
      fill_space(rng, domain, batch.boundary, j);
      const auto axis = static_cast<std::size_t>(face / 2);
      batch.boundary(1 + face / 2, j) = face % 2 == 0 ? domain.lower[axis] : domain.upper[axis];
    }
  }

  ++state.epoch;
  return batch;
}

Point column_point(const Eigen::MatrixXd& points, Eigen::Index j) {
  Point p;
  p.t = points(0, j);
  for (Eigen::Index i = 1; i < points.rows() && i <= kMaxSpatialDim; ++i) {
    p.x[static_cast<std::size_t>(i - 1)] = points(i, j);
  }
  return p;
}

}  // namespace cpinn
