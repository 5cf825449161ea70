#pragma once

#include "cpinn/autodiff.hpp"
#include "cpinn/network.hpp"
#include "cpinn/problems.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpinn {

/// Uniform axis lo, lo + h, ..., hi with n >= 1 nodes (n == 1: the single
/// node lo).
struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  int n = 1;

  double step() const { return n > 1 ? (hi - lo) / (n - 1) : 0.0; }
  double at(int i) const { return n > 1 ? lo + (hi - lo) * i / (n - 1) : lo; }
  bool operator==(const Axis&) const = default;
};

/// Scalar field sampled on a regular (t, x) grid; values(i, j) = f(t_i, x_j).
/// A purely temporal field has x.n == 1.
struct GridField {
  Axis t;
  Axis x;
  Eigen::MatrixXd values;

  /// Bilinear interpolation; queries outside the grid clamp to its edge.
  double operator()(double t, double x) const;
  /// Throws std::invalid_argument on shape mismatch, empty axes or
  /// non-finite values.
  void validate() const;

  static GridField sample(const std::function<double(double, double)>& f, Axis t, Axis x);
};

using ControlField = GridField;

/// CSV layout: "t0,t1,nt,x0,x1,nx", one row with those numbers, then nt rows
/// of nx values. Values are written with %.17g so a round trip is exact.
void write_field_csv(const std::filesystem::path& path, const GridField& field);
GridField read_field_csv(const std::filesystem::path& path);

/// One output of a network head sampled on a grid (d <= 1). Points are
/// evaluated in chunks so memory stays bounded on fine grids.
GridField sample_network(const ControlPinnParams& params, Head head, int component, Axis t, Axis x);

class StabilityError : public std::runtime_error {
 public:
  StabilityError(double max_dt, const std::string& what) : std::runtime_error(what), max_dt_(max_dt) {}
  /// Largest time step the explicit scheme accepts on the requested grid.
  double max_stable_dt() const { return max_dt_; }

 private:
  double max_dt_;
};

struct DnsOptions {
  int nx = 1001;                          // spatial nodes including both boundaries
  double dt = 0.0;                        // 0: fewest steps within the stability bound
  std::vector<double> output_times = {};  // snapshots; snapped to the nearest step
};

struct DnsSolution {
  Axis x;
  std::vector<double> times;  // actual snapshot times
  Eigen::MatrixXd state;      // one row per snapshot
  double dt = 0.0;
  double dx = 0.0;
  int steps = 0;
  std::string scheme = "forward Euler, central second difference";

  /// Snapshot row closest to `t`.
  Eigen::VectorXd at(double t) const;
};

/// y_t = diffusivity y_xx + u(t, x) on [x.lo, x.hi] with zero Dirichlet data,
/// integrated from the control field's t.lo to t.hi. Stability requires
/// dt <= dx^2 / (2 diffusivity); a larger requested dt throws StabilityError.
DnsSolution solve_heat_dns(const ControlField& control, double diffusivity,
                           const std::function<double(double)>& initial_state, const DnsOptions& options);

struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
};

using OdeRhs = std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& y, double u)>;

/// Classical RK4 with the control sampled at t, t + h/2, t + h.
/// Throws std::domain_error as soon as the state is not finite.
Trajectory integrate_ode(const OdeRhs& f, const Eigen::VectorXd& y0, const std::function<double(double)>& control,
                         double t0, double t1, int steps);

/// |a - b|_2 / |b|_2.
double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// relative_error of a DNS snapshot against `reference` on the DNS grid.
double relative_error_at(const DnsSolution& dns, const std::function<double(double, double)>& reference, double t);

/// Mean of u^2 over the grid, trapezoidal in each axis.
double control_effort(const ControlField& control);

/// Trapezoidal integral over the grid; a temporal field integrates over t
/// only.
double integrate(const GridField& field);

/// The problem's objective: running cost over the space-time grid plus the
/// terminal and initial costs over space. Needs one state and one control
/// component and at most one spatial dimension; y and u share the grid.
double cost_functional(const ControlProblem& problem, const GridField& y, const GridField& u);

struct ErrorRow {
  double time = 0.0;
  double relative_error = 0.0;
};

/// "time,relative_error" CSV.
void write_error_table(const std::filesystem::path& path, const std::vector<ErrorRow>& rows);

}  // namespace cpinn
