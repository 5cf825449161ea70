#pragma once

#include "cpinn/autodiff.hpp"
#include "cpinn/dual.hpp"
#include "cpinn/network.hpp"

#include <Eigen/Core>

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cpinn {

using ad::Dual;

inline constexpr int kMaxSpatialDim = 3;

struct Point {
  double t = 0.0;
  std::array<double, kMaxSpatialDim> x{};
};

/// Time interval times an axis-aligned spatial box.
struct Domain {
  double t0 = 0.0;
  double tf = 1.0;
  std::vector<double> lower;
  std::vector<double> upper;

  int spatial_dim() const { return static_cast<int>(lower.size()); }
  /// Throws std::invalid_argument unless t0 < tf and every side is positive.
  void validate() const;
};

/// Contract violation: a residual was asked for data it cannot use (missing
/// derivative order, point off its manifold).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Dual-valued jet of one head at one point. Spatial partials are stored
/// component-major: index c * spatial_dim + i.
class LocalJet {
 public:
  LocalJet(int components, int spatial_dim, bool has_time, int space_order);

  /// Copies a plain jet; every entry has zero gradient.
  static LocalJet constant(const Jet& jet, int spatial_dim);
  /// Jet of `head` at `point` of a batch, with one Dual seed per entry. Seeds
  /// are numbered from `first_seed`, component-major then channel, and
  /// `total_seeds` is the size of the seed space.
  static LocalJet seeded(const JetBatch& batch, Head head, Eigen::Index point, int first_seed, int total_seeds);

  int components() const { return components_; }
  int spatial_dim() const { return spatial_dim_; }

  const Dual& value(int c) const { return value_[static_cast<std::size_t>(c)]; }
  const Dual& dt(int c) const;
  const Dual& dx(int c, int i) const;
  const Dual& dxx(int c, int i) const;
  Dual laplacian(int c) const;
  std::span<const Dual> values() const { return value_; }

  Dual& value(int c) { return value_[static_cast<std::size_t>(c)]; }
  Dual& dt(int c) { return const_cast<Dual&>(std::as_const(*this).dt(c)); }
  Dual& dx(int c, int i) { return const_cast<Dual&>(std::as_const(*this).dx(c, i)); }
  Dual& dxx(int c, int i) { return const_cast<Dual&>(std::as_const(*this).dxx(c, i)); }

 private:
  int components_;
  int spatial_dim_;
  bool has_time_;
  int space_order_;
  std::vector<Dual> value_;
  std::vector<Dual> dt_;
  std::vector<Dual> dx_;
  std::vector<Dual> dxx_;
};

/// Which point set a data-tracking defect refers to.
enum class TrackingSet { initial, terminal, interior };

struct Reference {
  std::optional<Eigen::VectorXd> y;
  std::optional<Eigen::VectorXd> u;
  std::optional<Eigen::VectorXd> lambda;
};

/// An optimal control problem
///
///   min_u  int int g(y, u) dx dt + int w(y(tf)) dx  [+ int c(y(t0)) dx]
///   s.t.   dy/dt = f(y, u) in Omega, y(t0) = y0, B y = b on the boundary
///
/// together with its first-order optimality system. Every PDE here has a
/// self-adjoint spatial operator under Dirichlet data, so each problem
/// supplies the strong-form adjoint right-hand side directly:
///
///   dlambda/dt = adjoint_rhs = -lambda^T df/dy - dg/dy.
///
/// All residual inputs are Dual so that the loss can differentiate them with
/// respect to the network's jet entries.
class ControlProblem {
 public:
  virtual ~ControlProblem() = default;

  virtual std::string id() const = 0;
  virtual Domain domain() const = 0;
  virtual int state_dim() const = 0;
  virtual int control_dim() const = 0;

  /// Network widths for this problem; the hidden shape is the shared default.
  ArchitectureConfig architecture() const;
  /// Derivatives the interior residuals need.
  DerivativeRequest interior_request() const;

  /// f(y, u). Needs spatial second derivatives of y for PDE problems.
  virtual std::vector<Dual> dynamics(const Point& p, const LocalJet& y, std::span<const Dual> u) const = 0;
  virtual Dual running_cost(const Point& p, std::span<const Dual> y, std::span<const Dual> u) const = 0;
  virtual std::vector<Dual> running_cost_dy(const Point& p, std::span<const Dual> y,
                                            std::span<const Dual> u) const = 0;
  virtual std::vector<Dual> running_cost_du(const Point& p, std::span<const Dual> y,
                                            std::span<const Dual> u) const = 0;
  virtual Dual terminal_cost(const Point& p, std::span<const Dual> y) const;
  virtual std::vector<Dual> terminal_cost_dy(const Point& p, std::span<const Dual> y) const;
  /// Cost on the initial slice; zero unless a problem tracks it.
  virtual Dual initial_cost(const Point& p, std::span<const Dual> y) const;

  /// y0(x) per state component; nullopt where the component is free at t0.
  virtual std::vector<std::optional<double>> initial_state(const Point& p) const = 0;
  /// Dirichlet data b(t, x) on the spatial boundary.
  virtual std::vector<double> boundary_data(const Point& p) const;

  virtual std::vector<Dual> adjoint_rhs(const Point& p, const LocalJet& lambda, const LocalJet& y,
                                        std::span<const Dual> u) const = 0;
  /// lambda^T df/du + dg/du.
  virtual std::vector<Dual> optimality(const Point& p, std::span<const Dual> lambda, std::span<const Dual> y,
                                       std::span<const Dual> u) const = 0;

  /// Supervised defects y - y* on the given point set (empty when the problem
  /// has no target there).
  virtual std::vector<Dual> tracking_defect(TrackingSet set, const Point& p, std::span<const Dual> y) const;

  virtual Reference reference(const Point& p) const;
};

// Residuals of the optimality system, all pointwise.

/// dy/dt - f(y, u).
std::vector<Dual> forward_residual(const ControlProblem& problem, const Point& p, const LocalJet& y,
                                   std::span<const Dual> u);
/// dlambda/dt + lambda^T df/dy + dg/dy.
std::vector<Dual> adjoint_residual(const ControlProblem& problem, const Point& p, const LocalJet& lambda,
                                   const LocalJet& y, std::span<const Dual> u);
/// lambda^T df/du + dg/du (sign as the problem states it).
std::vector<Dual> optimality_residual(const ControlProblem& problem, const Point& p, std::span<const Dual> lambda,
                                      std::span<const Dual> y, std::span<const Dual> u);

/// y - y0 on constrained components, at t = t0.
std::vector<Dual> initial_defect(const ControlProblem& problem, const Point& p, std::span<const Dual> y);
/// lambda - dw/dy(y), at t = tf.
std::vector<Dual> terminal_adjoint_defect(const ControlProblem& problem, const Point& p,
                                          std::span<const Dual> lambda, std::span<const Dual> y);
/// B y - b on the spatial boundary.
std::vector<Dual> boundary_state_defect(const ControlProblem& problem, const Point& p, std::span<const Dual> y);
/// B* lambda (= lambda for Dirichlet data) on the spatial boundary.
std::vector<Dual> boundary_adjoint_defect(const ControlProblem& problem, const Point& p,
                                          std::span<const Dual> lambda);

struct ConditionResiduals {
  std::vector<Dual> initial;
  std::vector<Dual> terminal_adjoint;
  std::vector<Dual> boundary_state;
  std::vector<Dual> boundary_adjoint;
  std::vector<Dual> data_tracking;
};

/// Point-kind tags for condition_residuals.
enum class ConditionKind { initial, terminal, boundary };

/// All defects that apply at a condition point of the given kind; entries
/// that do not apply are left empty.
ConditionResiduals condition_residuals(const ControlProblem& problem, ConditionKind kind, const Point& p,
                                       std::span<const Dual> y, std::span<const Dual> lambda);

/// Manifold tolerance used by the condition residuals.
inline constexpr double kManifoldTolerance = 1e-12;

// Problem instances.

struct HeatOptions {
  double diffusivity = 0.1;
  double initial_tracking_weight = 1.0;
  double terminal_tracking_weight = 1.0;
  double control_weight = 1.0;
};

struct PredatorPreyOptions {
  double tracking_weight = 1.0;
  double control_weight = 1.0;
  bool track_predator = false;
};

struct ProblemOptions {
  HeatOptions heat;
  PredatorPreyOptions predator_prey;
};

/// min int y^2 + u^2/2 dt, y' = y/2 + u, y(0) = 1 on [0, 1].
class AnalyticalProblem final : public ControlProblem {
 public:
  std::string id() const override { return "analytical"; }
  Domain domain() const override { return {0.0, 1.0, {}, {}}; }
  int state_dim() const override { return 1; }
  int control_dim() const override { return 1; }

  std::vector<Dual> dynamics(const Point& p, const LocalJet& y, std::span<const Dual> u) const override;
  Dual running_cost(const Point& p, std::span<const Dual> y, std::span<const Dual> u) const override;
  std::vector<Dual> running_cost_dy(const Point& p, std::span<const Dual> y, std::span<const Dual> u) const override;
  std::vector<Dual> running_cost_du(const Point& p, std::span<const Dual> y, std::span<const Dual> u) const override;
  std::vector<std::optional<double>> initial_state(const Point& p) const override;
  std::vector<Dual> adjoint_rhs(const Point& p, const LocalJet& lambda, const LocalJet& y,
                                std::span<const Dual> u) const override;
  std::vector<Dual> optimality(const Point& p, std::span<const Dual> lambda, std::span<const Dual> y,
                               std::span<const Dual> u) const override;
  Reference reference(const Point& p) const override;

  static double optimal_state(double t);
  static double optimal_control(double t);
  static double optimal_adjoint(double t) { return -optimal_control(t); }
};

/// 1-D heat equation y_t = a y_xx + u on [0,1]^2 with Dirichlet zero
/// boundaries, cost  ci |y(0)-y*(0)|^2 + ct |y(1)-y*(1)|^2 + cu int u^2.
class HeatProblem final : public ControlProblem {
 public:
  explicit HeatProblem(HeatOptions options = {});

  const HeatOptions& options() const { return options_; }
  std::string id() const override { return "heat"; }
  Domain domain() const override { return {0.0, 1.0, {0.0}, {1.0}}; }
  int state_dim() const override { return 1; }
  int control_dim() const override { return 1; }

  std::vector<Dual> dynamics(const Point& p, const LocalJet& y, std::span<const Dual> u) const override;
  Dual running_cost(const Point& p, std::span<const Dual> y, std::span<const Dual> u) const override;
  std::vector<Dual> running_cost_dy(const Point& p, std::span<const Dual> y, std::span<const Dual> u) const override;
  std::vector<Dual> running_cost_du(const Point& p, std::span<const Dual> y, std::span<const Dual> u) const override;
  Dual terminal_cost(const Point& p, std::span<const Dual> y) const override;
  std::vector<Dual> terminal_cost_dy(const Point& p, std::span<const Dual> y) const override;
  Dual initial_cost(const Point& p, std::span<const Dual> y) const override;
  std::vector<std::optional<double>> initial_state(const Point& p) const override;
  std::vector<Dual> adjoint_rhs(const Point& p, const LocalJet& lambda, const LocalJet& y,
                                std::span<const Dual> u) const override;
  std::vector<Dual> optimality(const Point& p, std::span<const Dual> lambda, std::span<const Dual> y,
                               std::span<const Dual> u) const override;
  std::vector<Dual> tracking_defect(TrackingSet set, const Point& p, std::span<const Dual> y) const override;
  Reference reference(const Point& p) const override;

  /// y*(t, x) = 2/(pi + 4 pi^3) (e^{-pi^2 t} - cos(pi t/2) + 2 pi sin(pi t/2)) sin(pi x).
  static double reference_state(double t, double x);
  /// u*(t, x) = sin(pi x) sin(pi t / 2).
  static double reference_control(double t, double x);
  /// y0(x) = sin(pi x) sin(2 pi x).
  static double initial_profile(double x);

 private:
  HeatOptions options_;
};

/// Reaction-diffusion predator (y1) / prey (y2) system on [0,1] x [0,1]^2:
///   y1_t = lap y1 + u1 - y1,  u1 = 0
///   y2_t = lap y2 + u2 + y2
/// The network's single control output is u2.
class PredatorPreyProblem final : public ControlProblem {
 public:
  explicit PredatorPreyProblem(PredatorPreyOptions options = {});

  const PredatorPreyOptions& options() const { return options_; }
  std::string id() const override { return "predator_prey"; }
  Domain domain() const override { return {0.0, 1.0, {0.0, 0.0}, {1.0, 1.0}}; }
  int state_dim() const override { return 2; }
  int control_dim() const override { return 1; }

  std::vector<Dual> dynamics(const Point& p, const LocalJet& y, std::span<const Dual> u) const override;
  Dual running_cost(const Point& p, std::span<const Dual> y, std::span<const Dual> u) const override;
  std::vector<Dual> running_cost_dy(const Point& p, std::span<const Dual> y, std::span<const Dual> u) const override;
  std::vector<Dual> running_cost_du(const Point& p, std::span<const Dual> y, std::span<const Dual> u) const override;
  std::vector<std::optional<double>> initial_state(const Point& p) const override;
  std::vector<Dual> adjoint_rhs(const Point& p, const LocalJet& lambda, const LocalJet& y,
                                std::span<const Dual> u) const override;
  std::vector<Dual> optimality(const Point& p, std::span<const Dual> lambda, std::span<const Dual> y,
                               std::span<const Dual> u) const override;
  std::vector<Dual> tracking_defect(TrackingSet set, const Point& p, std::span<const Dual> y) const override;
  Reference reference(const Point& p) const override;

  /// y2*(t, x) = t (sin 2 pi x1 sin 2 pi x2)^2 + (1 - t) sin pi x1 sin pi x2.
  static double prey_target(double t, double x1, double x2);
  /// Uncontrolled predator: e^{-(2 pi^2 + 1) t} sin pi x1 sin pi x2.
  static double predator_solution(double t, double x1, double x2);

 private:
  PredatorPreyOptions options_;
};

/// "analytical", "heat" or "predator_prey"; throws std::invalid_argument otherwise.
std::unique_ptr<ControlProblem> make_problem(const std::string& id, const ProblemOptions& options = {});

}  // namespace cpinn
