#pragma once

#include "cpinn/autodiff.hpp"
#include "cpinn/problems.hpp"
#include "cpinn/sampler.hpp"

#include <array>
#include <string_view>

namespace cpinn {

/// Per-term loss scales. Residual terms default to 1e-1; the supervised and
/// condition terms keep 1.
struct LossWeights {
  double data = 1.0;
  double forward = 0.1;
  double adjoint = 0.1;
  double optimality = 0.1;
  double initial = 1.0;
  double terminal_adjoint = 1.0;
  double boundary = 1.0;

  /// Throws std::invalid_argument on negative or non-finite weights.
  void validate() const;
};

/// Weighted loss terms; each is weight x (mean over its point set of the
/// squared residual norm). Per-point contributions are added in point order
/// whatever the thread count; `total` is the sum of the seven terms in
/// declaration order.
struct LossBreakdown {
  double data = 0.0;
  double forward = 0.0;
  double adjoint = 0.0;
  double optimality = 0.0;
  double initial = 0.0;
  double terminal_adjoint = 0.0;
  double boundary = 0.0;
  double total = 0.0;

  static constexpr std::array<std::string_view, 7> kTermNames = {
      "data", "forward", "adjoint", "optimality", "initial", "terminal_adjoint", "boundary"};
  std::array<double, 7> terms() const {
    return {data, forward, adjoint, optimality, initial, terminal_adjoint, boundary};
  }
};

struct LossWithGradient {
  LossBreakdown breakdown;
  ParameterGradient gradient;
};

/// Loss of the optimality system on one collocation batch:
///
///   data             tracking defects y - y* the problem defines, summed
///                    over the point sets where they apply
///   forward          dy/dt - f(y, u)                 interior
///   adjoint          dlambda/dt + lambda^T f_y + g_y interior
///   optimality       lambda^T f_u + g_u              interior
///   initial          y(t0) - y0                      initial slice
///   terminal_adjoint lambda(tf) - w_y(y(tf))         terminal slice
///   boundary         |B y - b|^2 + |lambda|^2        spatial boundary
LossBreakdown evaluate(const ControlPinnParams& params, const ControlProblem& problem,
                       const CollocationBatch& batch, const LossWeights& weights);

/// Same loss plus its exact gradient with respect to every parameter.
LossWithGradient evaluate_with_gradient(const ControlPinnParams& params, const ControlProblem& problem,
                                        const CollocationBatch& batch, const LossWeights& weights);

/// The loss as a LossEvaluator over [interior, conditions] point batches, as
/// built by loss_point_batches. Writes the breakdown to `out` if non-null.
LossEvaluator make_loss_evaluator(const ControlProblem& problem, const CollocationBatch& batch,
                                  const LossWeights& weights, LossBreakdown* out);

/// Interior points with the jets the residuals need, then all condition points
/// (initial | terminal | boundary) with values only.
std::array<PointBatch, 2> loss_point_batches(const ControlProblem& problem, const CollocationBatch& batch);

}  // namespace cpinn
