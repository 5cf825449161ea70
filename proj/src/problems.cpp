#include "cpinn/problems.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cpinn {

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<Dual> zeros(int n) { return std::vector<Dual>(static_cast<std::size_t>(n)); }

void require_size(std::span<const Dual> v, int n, const char* what) {
  if (static_cast<int>(v.size()) != n) throw ContractError(std::string(what) + ": wrong number of components");
}

}  // namespace

void Domain::validate() const {
  if (!(t0 < tf)) throw std::invalid_argument("domain: t0 must be < tf");
  if (lower.size() != upper.size()) throw std::invalid_argument("domain: bound dimensions differ");
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!(lower[i] < upper[i])) throw std::invalid_argument("domain: degenerate spatial side");
  }
}

// LocalJet

LocalJet::LocalJet(int components, int spatial_dim, bool has_time, int space_order)
    : components_(components),
      spatial_dim_(spatial_dim),
      has_time_(has_time),
      space_order_(spatial_dim > 0 ? space_order : 0),
      value_(static_cast<std::size_t>(components)),
      dt_(has_time ? static_cast<std::size_t>(components) : 0),
      dx_(space_order_ >= 1 ? static_cast<std::size_t>(components * spatial_dim) : 0),
      dxx_(space_order_ >= 2 ? static_cast<std::size_t>(components * spatial_dim) : 0) {}

LocalJet LocalJet::constant(const Jet& jet, int spatial_dim) {
  const int n = static_cast<int>(jet.value.size());
  const int order = jet.d2_dx2.size() > 0 ? 2 : (jet.d_dx.size() > 0 ? 1 : 0);
  LocalJet j(n, spatial_dim, jet.d_dt.size() > 0, order);
  for (int c = 0; c < n; ++c) {
    j.value(c) = jet.value(c);
    if (j.has_time_) j.dt(c) = jet.d_dt(c);
    for (int i = 0; i < j.spatial_dim_; ++i) {
      if (j.space_order_ >= 1) j.dx(c, i) = jet.d_dx(c, i);
      if (j.space_order_ >= 2) j.dxx(c, i) = jet.d2_dx2(c, i);
    }
  }
  return j;
}

LocalJet LocalJet::seeded(const JetBatch& batch, Head head, Eigen::Index point, int first_seed, int total_seeds) {
  const JetLayout& layout = batch.layout;
  const auto& m = batch.head(head);
  const int n = static_cast<int>(m.rows());
  const int channels = layout.channels();
  const int d = layout.spatial_dim();
  LocalJet j(n, d, layout.dt() >= 0, layout.request().space_order);
  auto var = [&](int c, int channel) {
    return Dual::variable(batch.entry(head, c, channel, point), first_seed + c * channels + channel, total_seeds);
  };
  for (int c = 0; c < n; ++c) {
    j.value(c) = var(c, JetLayout::value());
    if (j.has_time_) j.dt(c) = var(c, layout.dt());
    for (int i = 0; i < d; ++i) {
      if (j.space_order_ >= 1) j.dx(c, i) = var(c, layout.dx(i));
      if (j.space_order_ >= 2) j.dxx(c, i) = var(c, layout.dxx(i));
    }
  }
  return j;
}

const Dual& LocalJet::dt(int c) const {
  if (!has_time_) throw ContractError("jet lacks the time derivative");
  return dt_[static_cast<std::size_t>(c)];
}
const Dual& LocalJet::dx(int c, int i) const {
  if (space_order_ < 1) throw ContractError("jet lacks first spatial derivatives");
  return dx_[static_cast<std::size_t>(c * spatial_dim_ + i)];
}
const Dual& LocalJet::dxx(int c, int i) const {
  if (space_order_ < 2) throw ContractError("jet lacks second spatial derivatives");
  return dxx_[static_cast<std::size_t>(c * spatial_dim_ + i)];
}
Dual LocalJet::laplacian(int c) const {
  Dual sum;
  for (int i = 0; i < spatial_dim_; ++i) sum += dxx(c, i);
  return sum;
}

// ControlProblem defaults

ArchitectureConfig ControlProblem::architecture() const {
  ArchitectureConfig c;
  c.spatial_dim = domain().spatial_dim();
  c.n_y = state_dim();
  c.n_u = control_dim();
  return c;
}

DerivativeRequest ControlProblem::interior_request() const {
  return {true, domain().spatial_dim() > 0 ? 2 : 0};
}

Dual ControlProblem::terminal_cost(const Point&, std::span<const Dual>) const { return {}; }
std::vector<Dual> ControlProblem::terminal_cost_dy(const Point&, std::span<const Dual>) const {
  return zeros(state_dim());
}
Dual ControlProblem::initial_cost(const Point&, std::span<const Dual>) const { return {}; }
std::vector<double> ControlProblem::boundary_data(const Point&) const {
  return std::vector<double>(static_cast<std::size_t>(state_dim()), 0.0);
}
std::vector<Dual> ControlProblem::tracking_defect(TrackingSet, const Point&, std::span<const Dual>) const {
  return {};
}
Reference ControlProblem::reference(const Point&) const { return {}; }

// Generic residuals

std::vector<Dual> forward_residual(const ControlProblem& problem, const Point& p, const LocalJet& y,
                                   std::span<const Dual> u) {
  require_size(u, problem.control_dim(), "forward_residual(u)");
  auto r = problem.dynamics(p, y, u);
  for (int c = 0; c < problem.state_dim(); ++c) r[static_cast<std::size_t>(c)] = y.dt(c) - r[static_cast<std::size_t>(c)];
  return r;
}

std::vector<Dual> adjoint_residual(const ControlProblem& problem, const Point& p, const LocalJet& lambda,
                                   const LocalJet& y, std::span<const Dual> u) {
  require_size(u, problem.control_dim(), "adjoint_residual(u)");
  auto r = problem.adjoint_rhs(p, lambda, y, u);
  for (int c = 0; c < problem.state_dim(); ++c) {
    r[static_cast<std::size_t>(c)] = lambda.dt(c) - r[static_cast<std::size_t>(c)];
  }
  return r;
}

std::vector<Dual> optimality_residual(const ControlProblem& problem, const Point& p, std::span<const Dual> lambda,
                                      std::span<const Dual> y, std::span<const Dual> u) {
  require_size(lambda, problem.state_dim(), "optimality_residual(lambda)");
  require_size(y, problem.state_dim(), "optimality_residual(y)");
  require_size(u, problem.control_dim(), "optimality_residual(u)");
  return problem.optimality(p, lambda, y, u);
}

std::vector<Dual> initial_defect(const ControlProblem& problem, const Point& p, std::span<const Dual> y) {
  const Domain dom = problem.domain();
  if (std::abs(p.t - dom.t0) > kManifoldTolerance) throw ContractError("initial_defect: point is not at t0");
  require_size(y, problem.state_dim(), "initial_defect(y)");
  const auto y0 = problem.initial_state(p);
  std::vector<Dual> r;
  for (std::size_t c = 0; c < y0.size(); ++c) {
    if (y0[c]) r.push_back(y[c] - *y0[c]);
  }
  return r;
}

std::vector<Dual> terminal_adjoint_defect(const ControlProblem& problem, const Point& p,
                                          std::span<const Dual> lambda, std::span<const Dual> y) {
  const Domain dom = problem.domain();
  if (std::abs(p.t - dom.tf) > kManifoldTolerance) throw ContractError("terminal_adjoint_defect: point is not at tf");
  require_size(lambda, problem.state_dim(), "terminal_adjoint_defect(lambda)");
  auto r = problem.terminal_cost_dy(p, y);
  for (std::size_t c = 0; c < r.size(); ++c) r[c] = lambda[c] - r[c];
  return r;
}

namespace {

void require_boundary(const ControlProblem& problem, const Point& p) {
  const Domain dom = problem.domain();
  for (int i = 0; i < dom.spatial_dim(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (std::abs(p.x[k] - dom.lower[k]) <= kManifoldTolerance || std::abs(p.x[k] - dom.upper[k]) <= kManifoldTolerance) {
      return;
    }
  }
  throw ContractError("boundary defect requested off the spatial boundary");
}

}  // namespace

std::vector<Dual> boundary_state_defect(const ControlProblem& problem, const Point& p, std::span<const Dual> y) {
  require_boundary(problem, p);
  require_size(y, problem.state_dim(), "boundary_state_defect(y)");
  const auto b = problem.boundary_data(p);
  std::vector<Dual> r(y.begin(), y.end());
  for (std::size_t c = 0; c < r.size(); ++c) r[c] -= b[c];
  return r;
}

std::vector<Dual> boundary_adjoint_defect(const ControlProblem& problem, const Point& p,
                                          std::span<const Dual> lambda) {
  require_boundary(problem, p);
  require_size(lambda, problem.state_dim(), "boundary_adjoint_defect(lambda)");
  return {lambda.begin(), lambda.end()};
}

ConditionResiduals condition_residuals(const ControlProblem& problem, ConditionKind kind, const Point& p,
                                       std::span<const Dual> y, std::span<const Dual> lambda) {
  ConditionResiduals r;
  switch (kind) {
    case ConditionKind::initial:
      r.initial = initial_defect(problem, p, y);
      r.data_tracking = problem.tracking_defect(TrackingSet::initial, p, y);
      break;
    case ConditionKind::terminal:
      r.terminal_adjoint = terminal_adjoint_defect(problem, p, lambda, y);
      r.data_tracking = problem.tracking_defect(TrackingSet::terminal, p, y);
      break;
    case ConditionKind::boundary:
      r.boundary_state = boundary_state_defect(problem, p, y);
      r.boundary_adjoint = boundary_adjoint_defect(problem, p, lambda);
      break;
  }
  return r;
}

// Analytical problem

double AnalyticalProblem::optimal_state(double t) {
  const double e3 = std::exp(3.0);
  return (2.0 * std::exp(3.0 * t) + e3) / (std::exp(1.5 * t) * (2.0 + e3));
}

double AnalyticalProblem::optimal_control(double t) {
  const double e3 = std::exp(3.0);
  return 2.0 * (std::exp(3.0 * t) - e3) / (std::exp(1.5 * t) * (2.0 + e3));
}

std::vector<Dual> AnalyticalProblem::dynamics(const Point&, const LocalJet& y, std::span<const Dual> u) const {
  return {0.5 * y.value(0) + u[0]};
}
Dual AnalyticalProblem::running_cost(const Point&, std::span<const Dual> y, std::span<const Dual> u) const {
  return y[0] * y[0] + 0.5 * u[0] * u[0];
}
std::vector<Dual> AnalyticalProblem::running_cost_dy(const Point&, std::span<const Dual> y,
                                                     std::span<const Dual>) const {
  return {2.0 * y[0]};
}
std::vector<Dual> AnalyticalProblem::running_cost_du(const Point&, std::span<const Dual>,
                                                     std::span<const Dual> u) const {
  return {u[0]};
}
std::vector<std::optional<double>> AnalyticalProblem::initial_state(const Point&) const { return {1.0}; }

std::vector<Dual> AnalyticalProblem::adjoint_rhs(const Point&, const LocalJet& lambda, const LocalJet& y,
                                                 std::span<const Dual>) const {
  return {-0.5 * lambda.value(0) - 2.0 * y.value(0)};
}

std::vector<Dual> AnalyticalProblem::optimality(const Point&, std::span<const Dual> lambda, std::span<const Dual>,
                                                std::span<const Dual> u) const {
  // stated as 0 = -lambda - u
  return {-lambda[0] - u[0]};
}

Reference AnalyticalProblem::reference(const Point& p) const {
  Reference r;
  r.y = Eigen::VectorXd::Constant(1, optimal_state(p.t));
  r.u = Eigen::VectorXd::Constant(1, optimal_control(p.t));
  r.lambda = Eigen::VectorXd::Constant(1, optimal_adjoint(p.t));
  return r;
}

// Heat problem

HeatProblem::HeatProblem(HeatOptions options) : options_(options) {
  if (!(options_.diffusivity > 0.0) || !std::isfinite(options_.diffusivity)) {
    throw std::invalid_argument("heat: diffusivity must be positive");
  }
  for (double w : {options_.initial_tracking_weight, options_.terminal_tracking_weight, options_.control_weight}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("heat: cost weights must be finite and >= 0");
  }
}

double HeatProblem::reference_state(double t, double x) {
  const double c = 2.0 / (kPi + 4.0 * kPi * kPi * kPi);
  return c * (std::exp(-kPi * kPi * t) - std::cos(kPi * t / 2.0) + 2.0 * kPi * std::sin(kPi * t / 2.0)) *
         std::sin(kPi * x);
}
double HeatProblem::reference_control(double t, double x) { return std::sin(kPi * x) * std::sin(kPi * t / 2.0); }
double HeatProblem::initial_profile(double x) { return std::sin(kPi * x) * std::sin(2.0 * kPi * x); }

std::vector<Dual> HeatProblem::dynamics(const Point&, const LocalJet& y, std::span<const Dual> u) const {
  return {options_.diffusivity * y.dxx(0, 0) + u[0]};
}
Dual HeatProblem::running_cost(const Point&, std::span<const Dual>, std::span<const Dual> u) const {
  return options_.control_weight * u[0] * u[0];
}
std::vector<Dual> HeatProblem::running_cost_dy(const Point&, std::span<const Dual>, std::span<const Dual>) const {
  return zeros(1);
}
std::vector<Dual> HeatProblem::running_cost_du(const Point&, std::span<const Dual>, std::span<const Dual> u) const {
  return {2.0 * options_.control_weight * u[0]};
}
Dual HeatProblem::terminal_cost(const Point& p, std::span<const Dual> y) const {
  const Dual e = y[0] - reference_state(p.t, p.x[0]);
  return options_.terminal_tracking_weight * e * e;
}
std::vector<Dual> HeatProblem::terminal_cost_dy(const Point& p, std::span<const Dual> y) const {
  return {2.0 * options_.terminal_tracking_weight * (y[0] - reference_state(p.t, p.x[0]))};
}
Dual HeatProblem::initial_cost(const Point& p, std::span<const Dual> y) const {
  const Dual e = y[0] - reference_state(p.t, p.x[0]);
  return options_.initial_tracking_weight * e * e;
}
std::vector<std::optional<double>> HeatProblem::initial_state(const Point& p) const {
  return {initial_profile(p.x[0])};
}
std::vector<Dual> HeatProblem::adjoint_rhs(const Point&, const LocalJet& lambda, const LocalJet&,
                                           std::span<const Dual>) const {
  // g does not depend on y in the interior
  return {-options_.diffusivity * lambda.dxx(0, 0)};
}
std::vector<Dual> HeatProblem::optimality(const Point&, std::span<const Dual> lambda, std::span<const Dual>,
                                          std::span<const Dual> u) const {
  return {lambda[0] + 2.0 * options_.control_weight * u[0]};
}
std::vector<Dual> HeatProblem::tracking_defect(TrackingSet set, const Point& p, std::span<const Dual> y) const {
  if (set == TrackingSet::interior) return {};
  return {y[0] - reference_state(p.t, p.x[0])};
}
Reference HeatProblem::reference(const Point& p) const {
  Reference r;
  r.y = Eigen::VectorXd::Constant(1, reference_state(p.t, p.x[0]));
  r.u = Eigen::VectorXd::Constant(1, reference_control(p.t, p.x[0]));
  return r;
}

// Predator-prey problem

PredatorPreyProblem::PredatorPreyProblem(PredatorPreyOptions options) : options_(options) {
  for (double w : {options_.tracking_weight, options_.control_weight}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("predator_prey: weights must be finite and >= 0");
  }
}

double PredatorPreyProblem::prey_target(double t, double x1, double x2) {
  const double s2 = std::sin(2.0 * kPi * x1) * std::sin(2.0 * kPi * x2);
  return t * s2 * s2 + (1.0 - t) * std::sin(kPi * x1) * std::sin(kPi * x2);
}

double PredatorPreyProblem::predator_solution(double t, double x1, double x2) {
  return std::exp(-(2.0 * kPi * kPi + 1.0) * t) * std::sin(kPi * x1) * std::sin(kPi * x2);
}

std::vector<Dual> PredatorPreyProblem::dynamics(const Point&, const LocalJet& y, std::span<const Dual> u) const {
  // u1 = 0: only the prey is controlled
  return {y.laplacian(0) - y.value(0), y.laplacian(1) + u[0] + y.value(1)};
}

Dual PredatorPreyProblem::running_cost(const Point& p, std::span<const Dual> y, std::span<const Dual> u) const {
  const Dual e2 = y[1] - prey_target(p.t, p.x[0], p.x[1]);
  Dual tracking = e2 * e2;
  if (options_.track_predator) {
    const Dual e1 = y[0] - predator_solution(p.t, p.x[0], p.x[1]);
    tracking += e1 * e1;
  }
  return options_.tracking_weight * tracking + options_.control_weight * u[0] * u[0];
}

std::vector<Dual> PredatorPreyProblem::running_cost_dy(const Point& p, std::span<const Dual> y,
                                                       std::span<const Dual>) const {
  std::vector<Dual> g = zeros(2);
  if (options_.track_predator) {
    g[0] = 2.0 * options_.tracking_weight * (y[0] - predator_solution(p.t, p.x[0], p.x[1]));
  }
  g[1] = 2.0 * options_.tracking_weight * (y[1] - prey_target(p.t, p.x[0], p.x[1]));
  return g;
}

std::vector<Dual> PredatorPreyProblem::running_cost_du(const Point&, std::span<const Dual>,
                                                       std::span<const Dual> u) const {
  return {2.0 * options_.control_weight * u[0]};
}

std::vector<std::optional<double>> PredatorPreyProblem::initial_state(const Point& p) const {
  return {std::sin(kPi * p.x[0]) * std::sin(kPi * p.x[1]), std::nullopt};
}

std::vector<Dual> PredatorPreyProblem::adjoint_rhs(const Point& p, const LocalJet& lambda, const LocalJet& y,
                                                   std::span<const Dual> u) const {
  const auto gy = running_cost_dy(p, y.values(), u);
  return {-lambda.laplacian(0) + lambda.value(0) - gy[0], -lambda.laplacian(1) - lambda.value(1) - gy[1]};
}

std::vector<Dual> PredatorPreyProblem::optimality(const Point&, std::span<const Dual> lambda, std::span<const Dual>,
                                                  std::span<const Dual> u) const {
  return {lambda[1] + 2.0 * options_.control_weight * u[0]};
}

std::vector<Dual> PredatorPreyProblem::tracking_defect(TrackingSet set, const Point& p,
                                                       std::span<const Dual> y) const {
  if (set == TrackingSet::initial) return {};
  std::vector<Dual> r;
  if (options_.track_predator) r.push_back(y[0] - predator_solution(p.t, p.x[0], p.x[1]));
  r.push_back(y[1] - prey_target(p.t, p.x[0], p.x[1]));
  return r;
}

Reference PredatorPreyProblem::reference(const Point& p) const {
  Reference r;
  Eigen::VectorXd y(2);
  y << predator_solution(p.t, p.x[0], p.x[1]), prey_target(p.t, p.x[0], p.x[1]);
  r.y = y;
  return r;
}

std::unique_ptr<ControlProblem> make_problem(const std::string& id, const ProblemOptions& options) {
  if (id == "analytical") return std::make_unique<AnalyticalProblem>();
  if (id == "heat") return std::make_unique<HeatProblem>(options.heat);
  if (id == "predator_prey") return std::make_unique<PredatorPreyProblem>(options.predator_prey);
  throw std::invalid_argument("unknown problem id '" + id + "'");
}

}  // namespace cpinn
