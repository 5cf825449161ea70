#include "cpinn/autodiff.hpp"

#include <cmath>
#include <string>

namespace cpinn {

JetLayout::JetLayout(int spatial_dim, DerivativeRequest request)
    : spatial_dim_(spatial_dim), request_(request) {
  if (spatial_dim < 0) throw std::invalid_argument("JetLayout: negative spatial dimension");
  if (request.space_order < 0 || request.space_order > 2) {
    throw std::invalid_argument("JetLayout: spatial derivative order must be 0, 1 or 2");
  }
  if (spatial_dim == 0) request_.space_order = 0;
  first_x_ = request_.time ? 2 : 1;
  channels_ = first_x_ + request_.space_order * spatial_dim_;
}

const Eigen::MatrixXd& JetBatch::head(Head h) const {
  switch (h) {
    case Head::y: return y;
    case Head::u: return u;
    case Head::lambda: return lambda;
  }
  throw std::logic_error("unknown head");
}

Jet JetBatch::jet(Head h, Eigen::Index point) const {
  const auto& m = head(h);
  const int d = layout.spatial_dim();
  Jet j;
  j.value = m.col(point);
  if (layout.dt() >= 0) j.d_dt = m.col(layout.dt() * points + point);
  if (layout.request().space_order >= 1 && d > 0) {
    j.d_dx.resize(m.rows(), d);
    for (int i = 0; i < d; ++i) j.d_dx.col(i) = m.col(layout.dx(i) * points + point);
  }
  if (layout.has_second_order()) {
    j.d2_dx2.resize(m.rows(), d);
    for (int i = 0; i < d; ++i) j.d2_dx2.col(i) = m.col(layout.dxx(i) * points + point);
  }
  return j;
}

JetSeeds JetSeeds::zeros_like(const JetBatch& batch) {
  return {Eigen::MatrixXd::Zero(batch.y.rows(), batch.y.cols()),
          Eigen::MatrixXd::Zero(batch.u.rows(), batch.u.cols()),
          Eigen::MatrixXd::Zero(batch.lambda.rows(), batch.lambda.cols())};
}

Eigen::MatrixXd& JetSeeds::head(Head h) {
  switch (h) {
    case Head::y: return y;
    case Head::u: return u;
    case Head::lambda: return lambda;
  }
  throw std::logic_error("unknown head");
}

namespace {

using Eigen::ArrayXXd;
using Eigen::Index;
using Eigen::MatrixXd;

/// Applies ELU channel-wise into `h`. Value: sigma(z); first order:
/// sigma'(z) dz; second order: sigma''(z) dz^2 + sigma'(z) d2z.
void elu_jets(const MatrixXd& z, const JetLayout& layout, Index n, MatrixXd& h, ArrayXXd& slope,
              ArrayXXd& curvature) {
  const auto zv = z.leftCols(n).array();
  curvature = zv.min(0.0).exp();
  slope = (zv > 0.0).select(1.0, curvature);
  curvature = (zv > 0.0).select(0.0, curvature);

  h.resize(z.rows(), z.cols());
  h.leftCols(n).array() = (zv > 0.0).select(zv, slope - 1.0);
  if (layout.dt() >= 0) {
    const Index c = layout.dt() * n;
    h.middleCols(c, n).array() = slope * z.middleCols(c, n).array();
  }
  const int d = layout.spatial_dim();
  if (layout.request().space_order >= 1) {
    for (int i = 0; i < d; ++i) {
      const Index c = layout.dx(i) * n;
      h.middleCols(c, n).array() = slope * z.middleCols(c, n).array();
    }
  }
  if (layout.has_second_order()) {
    for (int i = 0; i < d; ++i) {
      const Index cx = layout.dx(i) * n;
      const Index cxx = layout.dxx(i) * n;
      h.middleCols(cxx, n).array() =
          curvature * z.middleCols(cx, n).array().square() + slope * z.middleCols(cxx, n).array();
    }
  }
}

/// Transpose of elu_jets' linearization. For ELU sigma''' equals sigma''.
MatrixXd elu_backward(const MatrixXd& z, const MatrixXd& g, const JetTape& tape, const ArrayXXd& slope,
                      const ArrayXXd& curvature) {
  const Index n = tape.points;
  const JetLayout& layout = tape.layout;
  MatrixXd zbar(z.rows(), z.cols());
  zbar.leftCols(n).array() = g.leftCols(n).array() * slope;
  for (int k : tape.first_order_channels) {
    const Index c = k * n;
    const auto gk = g.middleCols(c, n).array();
    zbar.leftCols(n).array() += gk * curvature * z.middleCols(c, n).array();
    zbar.middleCols(c, n).array() = gk * slope;
  }
  if (layout.has_second_order()) {
    for (int i = 0; i < layout.spatial_dim(); ++i) {
      const Index cx = layout.dx(i) * n;
      const Index cxx = layout.dxx(i) * n;
      const auto gxx = g.middleCols(cxx, n).array();
      const auto zx = z.middleCols(cx, n).array();
      zbar.leftCols(n).array() += gxx * curvature * (zx.square() + z.middleCols(cxx, n).array());
      zbar.middleCols(cx, n).array() += 2.0 * gxx * curvature * zx;
      zbar.middleCols(cxx, n).array() = gxx * slope;
    }
  }
  return zbar;
}

}  // namespace

JetBatch forward_jets(const ControlPinnParams& params, const Eigen::MatrixXd& points, const JetLayout& layout,
                      JetTape* tape) {
  const auto& cfg = params.config();
  if (points.rows() != cfg.input_dim()) throw std::invalid_argument("forward_jets: point rows != 1 + spatial_dim");
  if (layout.spatial_dim() != cfg.spatial_dim) throw std::invalid_argument("forward_jets: layout dimension mismatch");
  const Index n = points.cols();
  const int channels = layout.channels();
  const Index cols = channels * n;
  const auto layers = params.layers();
  const auto count = layers.size();

  JetTape local;
  JetTape& tp = tape ? *tape : local;
  tp.layout = layout;
  tp.points = n;
  tp.channels = channels;
  tp.first_order_channels.clear();
  if (layout.dt() >= 0) tp.first_order_channels.push_back(layout.dt());
  if (layout.request().space_order >= 1) {
    for (int i = 0; i < cfg.spatial_dim; ++i) tp.first_order_channels.push_back(layout.dx(i));
  }
  // storage is reused when a tape is passed again with the same shapes
  tp.inputs.resize(count);
  tp.pre.resize(count);
  tp.slope.resize(count);
  tp.curvature.resize(count);

  MatrixXd& input = tp.inputs[0];
  input.setZero(cfg.input_dim(), cols);
  input.leftCols(n) = points;
  if (layout.dt() >= 0) input.block(0, layout.dt() * n, 1, n).setOnes();
  if (layout.request().space_order >= 1) {
    for (int i = 0; i < cfg.spatial_dim; ++i) input.block(1 + i, layout.dx(i) * n, 1, n).setOnes();
  }

  // evaluates layer l on tp.inputs[l] into `out`
  auto run = [&](int l, MatrixXd& out) {
    const auto idx = static_cast<std::size_t>(l);
    const DenseLayer& layer = layers[idx];
    const MatrixXd& in = tp.inputs[idx];
    const bool elu = layer.activated && cfg.activation == Activation::elu;
    MatrixXd& z = elu ? tp.pre[idx] : out;
    z.resize(layer.out, cols);
    z.noalias() = params.weight(l) * in;
    z.leftCols(n).colwise() += params.bias(l);
    if (elu) elu_jets(z, layout, n, out, tp.slope[idx], tp.curvature[idx]);
    if (!out.allFinite()) {
      throw EvaluationError(l, "non-finite activation in layer " + std::to_string(l));
    }
  };

  JetBatch result{layout, n, {}, {}, {}};
  const int w = cfg.width;
  for (int l = params.trunk_begin(); l < params.y_head(); ++l) run(l, tp.inputs[static_cast<std::size_t>(l) + 1]);
  run(params.y_head(), result.y);

  MatrixXd& control_in = tp.inputs[static_cast<std::size_t>(params.control_begin())];
  control_in.resize(cfg.n_y + w, cols);
  control_in.topRows(cfg.n_y) = result.y;
  control_in.bottomRows(w) = tp.inputs[static_cast<std::size_t>(params.y_head())];
  for (int l = params.control_begin(); l < params.u_head(); ++l) run(l, tp.inputs[static_cast<std::size_t>(l) + 1]);
  run(params.u_head(), result.u);

  MatrixXd& adjoint_in = tp.inputs[static_cast<std::size_t>(params.adjoint_begin())];
  adjoint_in.resize(cfg.n_y + cfg.n_u + w, cols);
  adjoint_in.topRows(cfg.n_y) = result.y;
  adjoint_in.middleRows(cfg.n_y, cfg.n_u) = result.u;
  adjoint_in.bottomRows(w) = tp.inputs[static_cast<std::size_t>(params.u_head())];
  for (int l = params.adjoint_begin(); l < params.lambda_head(); ++l) {
    run(l, tp.inputs[static_cast<std::size_t>(l) + 1]);
  }
  run(params.lambda_head(), result.lambda);
  return result;
}

void backward_jets(const ControlPinnParams& params, const JetTape& tape, const JetSeeds& seeds,
                   Eigen::Ref<Eigen::VectorXd> gradient) {
  const auto& cfg = params.config();
  const Index n = tape.points;
  const Index cols = tape.channels * n;
  if (gradient.size() != static_cast<Index>(params.size())) {
    throw std::invalid_argument("backward_jets: gradient size mismatch");
  }
  if (seeds.y.cols() != cols || seeds.u.cols() != cols || seeds.lambda.cols() != cols) {
    throw std::invalid_argument("backward_jets: seed shape does not match tape");
  }
  const auto layers = params.layers();

  auto back = [&](int l, MatrixXd g, bool need_input) -> MatrixXd {
    const DenseLayer& layer = layers[static_cast<std::size_t>(l)];
    const auto idx = static_cast<std::size_t>(l);
    MatrixXd zbar = (layer.activated && cfg.activation == Activation::elu)
                        ? elu_backward(tape.pre[idx], g, tape, tape.slope[idx], tape.curvature[idx])
                        : std::move(g);
    Eigen::Map<MatrixXd> gw(gradient.data() + layer.weight_offset, layer.out, layer.in);
    gw.noalias() += zbar * tape.inputs[idx].transpose();
    Eigen::Map<Eigen::VectorXd> gb(gradient.data() + layer.bias_offset, layer.out);
    gb += zbar.leftCols(n).rowwise().sum();
    if (!need_input) return {};
    MatrixXd in_bar(layer.in, cols);
    in_bar.noalias() = params.weight(l).transpose() * zbar;
    return in_bar;
  };

  MatrixXd g = back(params.lambda_head(), seeds.lambda, true);
  for (int l = params.lambda_head() - 1; l >= params.adjoint_begin(); --l) g = back(l, std::move(g), true);
  MatrixXd y_bar = seeds.y + g.topRows(cfg.n_y);
  const MatrixXd u_bar = seeds.u + g.middleRows(cfg.n_y, cfg.n_u);
  MatrixXd control_bar = g.bottomRows(cfg.width);
  control_bar += back(params.u_head(), u_bar, true);

  g = std::move(control_bar);
  for (int l = params.u_head() - 1; l >= params.control_begin(); --l) g = back(l, std::move(g), true);
  y_bar += g.topRows(cfg.n_y);
  MatrixXd trunk_bar = g.bottomRows(cfg.width);
  trunk_bar += back(params.y_head(), y_bar, true);

  g = std::move(trunk_bar);
  for (int l = params.y_head() - 1; l >= params.trunk_begin(); --l) g = back(l, std::move(g), l > 0);
}

HeadJets jet_eval(const ControlPinnParams& params, double t, std::span<const double> x,
                  DerivativeRequest request) {
  const int d = params.config().spatial_dim;
  if (static_cast<int>(x.size()) != d) throw std::invalid_argument("jet_eval: point dimension mismatch");
  if (request.space_order > 2) throw std::invalid_argument("jet_eval: at most second order in x");
  Eigen::MatrixXd point(1 + d, 1);
  point(0, 0) = t;
  for (int i = 0; i < d; ++i) point(1 + i, 0) = x[static_cast<std::size_t>(i)];
  const JetBatch batch = forward_jets(params, point, JetLayout(d, request));
  return {batch.jet(Head::y, 0), batch.jet(Head::u, 0), batch.jet(Head::lambda, 0)};
}

LossGradient loss_gradient(const ControlPinnParams& params, std::span<const PointBatch> batches,
                           const LossEvaluator& evaluator) {
  std::vector<JetTape> tapes(batches.size());
  std::vector<JetBatch> jets;
  std::vector<JetSeeds> seeds;
  jets.reserve(batches.size());
  seeds.reserve(batches.size());
  for (std::size_t i = 0; i < batches.size(); ++i) {
    jets.push_back(forward_jets(params, batches[i].points, batches[i].layout, &tapes[i]));
    seeds.push_back(JetSeeds::zeros_like(jets.back()));
  }
  LossGradient result;
  result.gradient = Eigen::VectorXd::Zero(static_cast<Index>(params.size()));
  result.loss = evaluator(params, jets, seeds, result.gradient);
  if (!std::isfinite(result.loss)) throw std::domain_error("loss_gradient: loss is not finite");
  for (std::size_t i = 0; i < batches.size(); ++i) backward_jets(params, tapes[i], seeds[i], result.gradient);
  return result;
}

}  // namespace cpinn
