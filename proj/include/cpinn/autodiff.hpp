#pragma once

#include "cpinn/network.hpp"

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpinn {

/// Input-derivative orders to materialize: d/dt (first order only) and pure
/// spatial partials d/dx_i, d^2/dx_i^2 up to `space_order`.
struct DerivativeRequest {
  bool time = false;
  int space_order = 0;
};

/// Channel layout of a batched jet. Channel 0 is the value, followed by d/dt
/// (if requested), the d/dx_i block and the d^2/dx_i^2 block. Batched
/// matrices place channel c of point j in column c * points + j.
class JetLayout {
 public:
  JetLayout(int spatial_dim, DerivativeRequest request);

  int spatial_dim() const { return spatial_dim_; }
  const DerivativeRequest& request() const { return request_; }
  int channels() const { return channels_; }

  static constexpr int value() { return 0; }
  /// -1 when not requested.
  int dt() const { return request_.time ? 1 : -1; }
  int dx(int i) const { return request_.space_order >= 1 ? first_x_ + i : -1; }
  int dxx(int i) const { return request_.space_order >= 2 ? first_x_ + spatial_dim_ + i : -1; }
  bool has_second_order() const { return request_.space_order >= 2 && spatial_dim_ > 0; }

 private:
  int spatial_dim_;
  DerivativeRequest request_;
  int first_x_;
  int channels_;
};

/// One head's output at one point together with its input partials.
/// `d_dx` and `d2_dx2` are (outputs x spatial_dim); empty when not requested.
struct Jet {
  Eigen::VectorXd value;
  Eigen::VectorXd d_dt;
  Eigen::MatrixXd d_dx;
  Eigen::MatrixXd d2_dx2;
};

struct HeadJets {
  Jet y;
  Jet u;
  Jet lambda;
};

enum class Head { y = 0, u = 1, lambda = 2 };

/// Network outputs over a batch of points, every requested channel included.
struct JetBatch {
  JetLayout layout;
  Eigen::Index points = 0;
  Eigen::MatrixXd y;
  Eigen::MatrixXd u;
  Eigen::MatrixXd lambda;

  const Eigen::MatrixXd& head(Head h) const;
  double entry(Head h, int component, int channel, Eigen::Index point) const {
    return head(h)(component, channel * points + point);
  }
  Jet jet(Head h, Eigen::Index point) const;
};

/// Adjoints of a scalar with respect to every entry of a JetBatch.
struct JetSeeds {
  Eigen::MatrixXd y;
  Eigen::MatrixXd u;
  Eigen::MatrixXd lambda;

  static JetSeeds zeros_like(const JetBatch& batch);
  Eigen::MatrixXd& head(Head h);
  double& entry(Head h, int component, int channel, Eigen::Index point, Eigen::Index points) {
    return head(h)(component, channel * points + point);
  }
};

/// Intermediate state kept by forward_jets for the reverse sweep.
struct JetTape {
  Eigen::Index points = 0;
  int channels = 0;
  std::vector<int> first_order_channels;  // dt then dx_i
  std::vector<Eigen::MatrixXd> inputs;    // per layer, in x (channels * points)
  std::vector<Eigen::MatrixXd> pre;       // per activated layer, out x (channels * points)
  std::vector<Eigen::ArrayXXd> slope;     // sigma'(z) on the value block
  std::vector<Eigen::ArrayXXd> curvature; // sigma''(z) == sigma'''(z) for ELU
  JetLayout layout{0, {}};
};

/// Non-finite value produced while propagating through the network.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(int layer, const std::string& what) : std::runtime_error(what), layer_(layer) {}
  int layer() const { return layer_; }

 private:
  int layer_;
};

/// ELU and its derivatives. The second (and third) derivative at z = 0 is
/// defined as 1, the limit from the negative side.
struct Elu {
  static double value(double z) { return z > 0.0 ? z : std::expm1(z); }
  static double slope(double z) { return z > 0.0 ? 1.0 : std::exp(z); }
  static double curvature(double z) { return z > 0.0 ? 0.0 : std::exp(z); }
};

/// Propagates second-order input jets through the network for every column of
/// `points` ((1 + spatial_dim) x N, row 0 is t). If `tape` is non-null it
/// receives what backward_jets needs.
JetBatch forward_jets(const ControlPinnParams& params, const Eigen::MatrixXd& points, const JetLayout& layout,
                      JetTape* tape = nullptr);

/// Reverse sweep over the jet computation: accumulates d(scalar)/d(params)
/// into `gradient` given d(scalar)/d(jet entries).
void backward_jets(const ControlPinnParams& params, const JetTape& tape, const JetSeeds& seeds,
                   Eigen::Ref<Eigen::VectorXd> gradient);

/// Exact jets of all three heads at a single point.
HeadJets jet_eval(const ControlPinnParams& params, double t, std::span<const double> x,
                  DerivativeRequest request);

using ParameterGradient = Eigen::VectorXd;

struct PointBatch {
  Eigen::MatrixXd points;
  JetLayout layout;
};

/// A scalar built from batched jets. Given the jets of each point batch it
/// returns the scalar and writes d(scalar)/d(entry) into the matching seeds.
/// `direct` receives any explicit parameter dependence (usually none).
using LossEvaluator = std::function<double(const ControlPinnParams& params, std::span<const JetBatch> jets,
                                           std::span<JetSeeds> seeds, Eigen::Ref<Eigen::VectorXd> direct)>;

struct LossGradient {
  double loss = 0.0;
  ParameterGradient gradient;
};

/// Scalar loss and its exact parameter gradient.
/// Throws std::domain_error if the loss is not finite.
LossGradient loss_gradient(const ControlPinnParams& params, std::span<const PointBatch> batches,
                           const LossEvaluator& evaluator);

}  // namespace cpinn
