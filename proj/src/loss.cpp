#include "cpinn/loss.hpp"

#include <cmath>
#include <exception>
#include <vector>
#include <stdexcept>

namespace cpinn {

void LossWeights::validate() const {
  for (double w : {data, forward, adjoint, optimality, initial, terminal_adjoint, boundary}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("loss weights must be finite and >= 0");
  }
}

std::array<PointBatch, 2> loss_point_batches(const ControlProblem& problem, const CollocationBatch& batch) {
  const int d = problem.domain().spatial_dim();
  Eigen::MatrixXd conditions(1 + d, batch.initial.cols() + batch.terminal.cols() + batch.boundary.cols());
  conditions << batch.initial, batch.terminal, batch.boundary;
  return {PointBatch{batch.interior, JetLayout(d, problem.interior_request())},
          PointBatch{std::move(conditions), JetLayout(d, {})}};
}

namespace {

/// Adds scale * |r|^2 to the running Dual and returns its plain value.
double add_squares(const std::vector<Dual>& r, double scale, Dual& acc) {
  double sum = 0.0;
  for (const Dual& v : r) {
    sum += v.value() * v.value();
    if (scale != 0.0) acc += scale * (v * v);
  }
  return scale * sum;
}

/// Scatters d(acc)/d(seed) back into the batch seeds of one point.
void scatter(const Dual& acc, const JetBatch& jets, JetSeeds& seeds, Eigen::Index point, int n_y, int n_u) {
  const int channels = jets.layout.channels();
  const int sizes[3] = {n_y, n_u, n_y};
  const Head heads[3] = {Head::y, Head::u, Head::lambda};
  int base = 0;
  for (int h = 0; h < 3; ++h) {
    for (int c = 0; c < sizes[h]; ++c) {
      for (int ch = 0; ch < channels; ++ch) {
        const double g = acc.grad(base + c * channels + ch);
        if (g != 0.0) seeds.entry(heads[h], c, ch, point, jets.points) += g;
      }
    }
    base += sizes[h] * channels;
  }
}

struct PointJets {
  LocalJet y;
  LocalJet u;
  LocalJet lambda;
};

PointJets point_jets(const JetBatch& jets, Eigen::Index j, int n_y, int n_u, bool seeded) {
  const int channels = jets.layout.channels();
  const int total = (2 * n_y + n_u) * channels;
  if (seeded && total > ad::kDualCapacity) {
    throw std::length_error("loss: jet entries per point exceed the Dual capacity");
  }
  if (seeded) {
    return {LocalJet::seeded(jets, Head::y, j, 0, total), LocalJet::seeded(jets, Head::u, j, n_y * channels, total),
            LocalJet::seeded(jets, Head::lambda, j, (n_y + n_u) * channels, total)};
  }
  const int d = jets.layout.spatial_dim();
  return {LocalJet::constant(jets.jet(Head::y, j), d), LocalJet::constant(jets.jet(Head::u, j), d),
          LocalJet::constant(jets.jet(Head::lambda, j), d)};
}

/// Runs body(j) for j in [0, n), in parallel when OpenMP is available, and
/// rethrows the first exception after the loop.
template <class Body>
void for_points(Eigen::Index n, const Body& body) {
  std::exception_ptr error;
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < n; ++j) {
    try {
      body(j);
    } catch (...) {
#pragma omp critical(cpinn_loss_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

// Per-point contributions are stored and summed afterwards in point order, so
// the result does not depend on the thread count.
LossBreakdown accumulate(const ControlProblem& problem, const CollocationBatch& batch, const LossWeights& w,
                         std::span<const JetBatch> jets, std::span<JetSeeds> seeds) {
  w.validate();
  const bool grad = !seeds.empty();
  const int n_y = problem.state_dim();
  const int n_u = problem.control_dim();
  const JetBatch& inner = jets[0];
  const JetBatch& cond = jets[1];

  // interior: forward, adjoint, optimality, tracking
  const Eigen::Index ni = inner.points;
  const double si = ni > 0 ? 1.0 / static_cast<double>(ni) : 0.0;
  Eigen::Matrix<double, 4, Eigen::Dynamic> interior(4, ni);
  std::vector<char> tracked(static_cast<std::size_t>(ni), 0);
  for_points(ni, [&](Eigen::Index j) {
    const Point p = column_point(batch.interior, j);
    const PointJets pj = point_jets(inner, j, n_y, n_u, grad);
    Dual acc;
    interior(0, j) = add_squares(forward_residual(problem, p, pj.y, pj.u.values()), w.forward * si, acc);
    interior(1, j) = add_squares(adjoint_residual(problem, p, pj.lambda, pj.y, pj.u.values()), w.adjoint * si, acc);
    interior(2, j) = add_squares(optimality_residual(problem, p, pj.lambda.values(), pj.y.values(), pj.u.values()),
                                 w.optimality * si, acc);
    const auto track = problem.tracking_defect(TrackingSet::interior, p, pj.y.values());
    tracked[static_cast<std::size_t>(j)] = !track.empty();
    interior(3, j) = add_squares(track, w.data * si, acc);
    if (grad) scatter(acc, inner, seeds[0], j, n_y, n_u);
  });

  // condition points: initial | terminal | boundary; rows: condition term,
  // tracking or second boundary term
  const Eigen::Index n0 = batch.initial.cols();
  const Eigen::Index n1 = batch.terminal.cols();
  const double s0 = n0 > 0 ? 1.0 / static_cast<double>(n0) : 0.0;
  const double s1 = n1 > 0 ? 1.0 / static_cast<double>(n1) : 0.0;
  const double s2 = batch.boundary.cols() > 0 ? 1.0 / static_cast<double>(batch.boundary.cols()) : 0.0;
  Eigen::Matrix<double, 2, Eigen::Dynamic> conditions(2, cond.points);
  for_points(cond.points, [&](Eigen::Index k) {
    const PointJets pj = point_jets(cond, k, n_y, n_u, grad);
    Dual acc;
    if (k < n0) {
      const Point p = column_point(batch.initial, k);
      const auto r = condition_residuals(problem, ConditionKind::initial, p, pj.y.values(), pj.lambda.values());
      conditions(0, k) = add_squares(r.initial, w.initial * s0, acc);
      conditions(1, k) = add_squares(r.data_tracking, w.data * s0, acc);
    } else if (k < n0 + n1) {
      const Point p = column_point(batch.terminal, k - n0);
      const auto r = condition_residuals(problem, ConditionKind::terminal, p, pj.y.values(), pj.lambda.values());
      conditions(0, k) = add_squares(r.terminal_adjoint, w.terminal_adjoint * s1, acc);
      conditions(1, k) = add_squares(r.data_tracking, w.data * s1, acc);
    } else {
      const Point p = column_point(batch.boundary, k - n0 - n1);
      const auto r = condition_residuals(problem, ConditionKind::boundary, p, pj.y.values(), pj.lambda.values());
      conditions(0, k) = add_squares(r.boundary_state, w.boundary * s2, acc);
      conditions(1, k) = add_squares(r.boundary_adjoint, w.boundary * s2, acc);
    }
    if (grad) scatter(acc, cond, seeds[1], k, n_y, n_u);
  });

  LossBreakdown b;
  double interior_tracking = 0.0;
  bool has_interior_tracking = false;
  for (Eigen::Index j = 0; j < ni; ++j) {
    b.forward += interior(0, j);
    b.adjoint += interior(1, j);
    b.optimality += interior(2, j);
    if (tracked[static_cast<std::size_t>(j)]) {
      has_interior_tracking = true;
      interior_tracking += interior(3, j);
    }
  }
  double initial_tracking = 0.0;
  double terminal_tracking = 0.0;
  for (Eigen::Index k = 0; k < cond.points; ++k) {
    if (k < n0) {
      b.initial += conditions(0, k);
      initial_tracking += conditions(1, k);
    } else if (k < n0 + n1) {
      b.terminal_adjoint += conditions(0, k);
      terminal_tracking += conditions(1, k);
    } else {
      b.boundary += conditions(0, k);
      b.boundary += conditions(1, k);
    }
  }
  b.data = (has_interior_tracking ? interior_tracking : 0.0) + initial_tracking + terminal_tracking;

  b.total = b.data;
  b.total += b.forward;
  b.total += b.adjoint;
  b.total += b.optimality;
  b.total += b.initial;
  b.total += b.terminal_adjoint;
  b.total += b.boundary;
  return b;
}

}  // namespace

LossEvaluator make_loss_evaluator(const ControlProblem& problem, const CollocationBatch& batch,
                                  const LossWeights& weights, LossBreakdown* out) {
  return [&problem, &batch, weights, out](const ControlPinnParams&, std::span<const JetBatch> jets,
                                         std::span<JetSeeds> seeds, Eigen::Ref<Eigen::VectorXd>) {
    const LossBreakdown b = accumulate(problem, batch, weights, jets, seeds);
    if (out) *out = b;
    return b.total;
  };
}

LossBreakdown evaluate(const ControlPinnParams& params, const ControlProblem& problem,
                       const CollocationBatch& batch, const LossWeights& weights) {
  const auto batches = loss_point_batches(problem, batch);
  const JetBatch jets[2] = {forward_jets(params, batches[0].points, batches[0].layout),
                            forward_jets(params, batches[1].points, batches[1].layout)};
  return accumulate(problem, batch, weights, jets, {});
}

LossWithGradient evaluate_with_gradient(const ControlPinnParams& params, const ControlProblem& problem,
                                        const CollocationBatch& batch, const LossWeights& weights) {
  const auto batches = loss_point_batches(problem, batch);
  LossWithGradient result;
  auto lg = loss_gradient(params, batches, make_loss_evaluator(problem, batch, weights, &result.breakdown));
  result.gradient = std::move(lg.gradient);
  return result;
}

}  // namespace cpinn
