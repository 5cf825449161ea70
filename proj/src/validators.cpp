#include "cpinn/validators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cpinn {

namespace {

/// Cell index and weight of the upper node for linear interpolation.
std::pair<int, double> locate(const Axis& a, double v) {
  if (a.n == 1) return {0, 0.0};
  const double s = std::clamp((v - a.lo) / a.step(), 0.0, static_cast<double>(a.n - 1));
  const int i = std::min(static_cast<int>(s), a.n - 2);
  return {i, s - i};
}

Eigen::VectorXd trapezoid_weights(const Axis& a) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(a.n, a.step());
  if (a.n == 1) return Eigen::VectorXd::Ones(1);
  w(0) *= 0.5;
  w(a.n - 1) *= 0.5;
  return w;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<double> parse_row(const std::string& line, const std::filesystem::path& path, int row) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(row) + ": not a number: '" + cell + "'");
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

double GridField::operator()(double t_, double x_) const {
  const auto [i, wt] = locate(t, t_);
  const auto [j, wx] = locate(x, x_);
  const int i1 = t.n > 1 ? i + 1 : i;
  const int j1 = x.n > 1 ? j + 1 : j;
  return (1 - wt) * ((1 - wx) * values(i, j) + wx * values(i, j1)) +
         wt * ((1 - wx) * values(i1, j) + wx * values(i1, j1));
}

void GridField::validate() const {
  if (t.n < 1 || x.n < 1) throw std::invalid_argument("grid field: empty axis");
  if (values.rows() != t.n || values.cols() != x.n) throw std::invalid_argument("grid field: shape mismatch");
  if ((t.n > 1 && !(t.hi > t.lo)) || (x.n > 1 && !(x.hi > x.lo))) {
    throw std::invalid_argument("grid field: axis bounds must increase");
  }
  if (!values.allFinite()) throw std::invalid_argument("grid field: non-finite value");
}

GridField GridField::sample(const std::function<double(double, double)>& f, Axis t, Axis x) {
  GridField g{t, x, Eigen::MatrixXd(t.n, x.n)};
  for (int i = 0; i < t.n; ++i) {
    for (int j = 0; j < x.n; ++j) g.values(i, j) = f(t.at(i), x.at(j));
  }
  return g;
}

void write_field_csv(const std::filesystem::path& path, const GridField& field) {
  field.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "t0,t1,nt,x0,x1,nx\n";
  out << fmt(field.t.lo) << ',' << fmt(field.t.hi) << ',' << field.t.n << ',' << fmt(field.x.lo) << ','
      << fmt(field.x.hi) << ',' << field.x.n << '\n';
  for (int i = 0; i < field.t.n; ++i) {
    for (int j = 0; j < field.x.n; ++j) out << (j ? "," : "") << fmt(field.values(i, j));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

GridField read_field_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "t0,t1,nt,x0,x1,nx") {
    throw std::runtime_error(path.string() + ":1: expected header t0,t1,nt,x0,x1,nx");
  }
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ":2: missing grid row");
  const auto spec = parse_row(line, path, 2);
  if (spec.size() != 6) throw std::runtime_error(path.string() + ":2: grid row needs 6 values");
  GridField g{{spec[0], spec[1], static_cast<int>(spec[2])}, {spec[3], spec[4], static_cast<int>(spec[5])}, {}};
  if (g.t.n < 1 || g.x.n < 1) throw std::runtime_error(path.string() + ":2: empty axis");
  g.values.resize(g.t.n, g.x.n);
  for (int i = 0; i < g.t.n; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing row " + std::to_string(i + 3));
    const auto row = parse_row(line, path, i + 3);
    if (static_cast<int>(row.size()) != g.x.n) {
      throw std::runtime_error(path.string() + ":" + std::to_string(i + 3) + ": expected " +
                               std::to_string(g.x.n) + " values");
    }
    for (int j = 0; j < g.x.n; ++j) g.values(i, j) = row[static_cast<std::size_t>(j)];
  }
  g.validate();
  return g;
}

GridField sample_network(const ControlPinnParams& params, Head head, int component, Axis t, Axis x) {
  const int d = params.config().spatial_dim;
  if (d > 1) throw std::invalid_argument("sample_network: at most one spatial dimension");
  if (d == 0 && x.n != 1) throw std::invalid_argument("sample_network: temporal problem needs x.n == 1");
  const int width = head == Head::u ? params.config().n_u : params.config().n_y;
  if (component < 0 || component >= width) throw std::invalid_argument("sample_network: component out of range");

  GridField g{t, x, Eigen::MatrixXd(t.n, x.n)};
  const Eigen::Index total = static_cast<Eigen::Index>(t.n) * x.n;
  constexpr Eigen::Index kChunk = 8192;
  const JetLayout layout(d, {false, 0});
  for (Eigen::Index begin = 0; begin < total; begin += kChunk) {
    const Eigen::Index count = std::min(kChunk, total - begin);
    Eigen::MatrixXd pts(1 + d, count);
    for (Eigen::Index k = 0; k < count; ++k) {
      const Eigen::Index idx = begin + k;
      pts(0, k) = t.at(static_cast<int>(idx / x.n));
      if (d == 1) pts(1, k) = x.at(static_cast<int>(idx % x.n));
    }
    const JetBatch out = forward_jets(params, pts, layout);
    const Eigen::MatrixXd& m = out.head(head);
    for (Eigen::Index k = 0; k < count; ++k) {
      const Eigen::Index idx = begin + k;
      g.values(idx / x.n, idx % x.n) = m(component, k);
    }
  }
  return g;
}

Eigen::VectorXd DnsSolution::at(double t) const {
  if (times.empty()) throw std::logic_error("DnsSolution: no snapshots");
  std::size_t best = 0;
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (std::abs(times[k] - t) < std::abs(times[best] - t)) best = k;
  }
  return state.row(static_cast<Eigen::Index>(best)).transpose();
}

DnsSolution solve_heat_dns(const ControlField& control, double diffusivity,
                           const std::function<double(double)>& initial_state, const DnsOptions& options) {
  control.validate();
  if (!(diffusivity > 0.0)) throw std::invalid_argument("solve_heat_dns: diffusivity must be positive");
  if (options.nx < 3) throw std::invalid_argument("solve_heat_dns: need at least 3 spatial nodes");
  if (control.t.n < 2) throw std::invalid_argument("solve_heat_dns: control needs at least 2 time nodes");

  DnsSolution sol;
  sol.x = {control.x.lo, control.x.hi, options.nx};
  sol.dx = sol.x.step();
  const double t0 = control.t.lo;
  const double span = control.t.hi - control.t.lo;
  const double max_dt = sol.dx * sol.dx / (2.0 * diffusivity);
  if (options.dt > 0.0) {
    if (options.dt > max_dt) {
      throw StabilityError(max_dt, "solve_heat_dns: dt " + fmt(options.dt) + " exceeds the stability bound " +
                                       fmt(max_dt) + "; use dt <= " + fmt(max_dt));
    }
    sol.steps = static_cast<int>(std::ceil(span / options.dt - 1e-9));
  } else {
    sol.steps = static_cast<int>(std::ceil(span / max_dt));
  }
  sol.steps = std::max(sol.steps, 1);
  sol.dt = span / sol.steps;

  // control interpolated once onto the solver's x nodes: rows follow the
  // control's time axis
  const int nx = options.nx;
  Eigen::MatrixXd u_rows(control.t.n, nx);
  for (int j = 0; j < nx; ++j) {
    const auto [c, w] = locate(control.x, sol.x.at(j));
    const int c1 = control.x.n > 1 ? c + 1 : c;
    u_rows.col(j) = (1 - w) * control.values.col(c) + w * control.values.col(c1);
  }

  std::vector<int> snap_steps;
  for (double t : options.output_times) {
    const double s = std::round((t - t0) / sol.dt);
    snap_steps.push_back(static_cast<int>(std::clamp(s, 0.0, static_cast<double>(sol.steps))));
  }
  sol.state.resize(static_cast<Eigen::Index>(snap_steps.size()), nx);
  sol.times.resize(snap_steps.size());

  Eigen::VectorXd y(nx), next(nx);
  for (int j = 0; j < nx; ++j) y(j) = initial_state(sol.x.at(j));
  y(0) = 0.0;
  y(nx - 1) = 0.0;
  auto record = [&](int step) {
    for (std::size_t k = 0; k < snap_steps.size(); ++k) {
      if (snap_steps[k] != step) continue;
      sol.state.row(static_cast<Eigen::Index>(k)) = y.transpose();
      sol.times[k] = t0 + step * sol.dt;
    }
  };
  record(0);
  const double r = diffusivity * sol.dt / (sol.dx * sol.dx);
  for (int step = 0; step < sol.steps; ++step) {
    const double t = t0 + step * sol.dt;
    const auto [i, w] = locate(control.t, t);
    const auto u0 = u_rows.row(i);
    const auto u1 = u_rows.row(i + 1);
    next(0) = 0.0;
    next(nx - 1) = 0.0;
    for (int j = 1; j < nx - 1; ++j) {
      const double u = (1 - w) * u0(j) + w * u1(j);
      next(j) = y(j) + r * (y(j - 1) - 2.0 * y(j) + y(j + 1)) + sol.dt * u;
    }
    y.swap(next);
    record(step + 1);
  }
  if (!sol.state.allFinite()) throw std::domain_error("solve_heat_dns: non-finite state");
  return sol;
}

Trajectory integrate_ode(const OdeRhs& f, const Eigen::VectorXd& y0, const std::function<double(double)>& control,
                         double t0, double t1, int steps) {
  if (steps < 1) throw std::invalid_argument("integrate_ode: steps must be >= 1");
  const double h = (t1 - t0) / steps;
  Trajectory tr;
  tr.times.reserve(static_cast<std::size_t>(steps) + 1);
  tr.states.reserve(static_cast<std::size_t>(steps) + 1);
  Eigen::VectorXd y = y0;
  tr.times.push_back(t0);
  tr.states.push_back(y);
  for (int k = 0; k < steps; ++k) {
    const double t = t0 + k * h;
    const double um = control(t + 0.5 * h);
    const Eigen::VectorXd k1 = f(t, y, control(t));
    const Eigen::VectorXd k2 = f(t + 0.5 * h, y + 0.5 * h * k1, um);
    const Eigen::VectorXd k3 = f(t + 0.5 * h, y + 0.5 * h * k2, um);
    const Eigen::VectorXd k4 = f(t + h, y + h * k3, control(t + h));
    y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!y.allFinite()) throw std::domain_error("integrate_ode: non-finite state at step " + std::to_string(k + 1));
    tr.times.push_back(t0 + (k + 1) * h);
    tr.states.push_back(y);
  }
  return tr;
}

double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw std::invalid_argument("relative_error: size mismatch");
  const double den = b.norm();
  if (den == 0.0) throw std::domain_error("relative_error: reference has zero norm");
  const Eigen::VectorXd diff = a - b;
  return diff.norm() / den;
}

double relative_error_at(const DnsSolution& dns, const std::function<double(double, double)>& reference, double t) {
  const Eigen::VectorXd y = dns.at(t);
  Eigen::VectorXd ref(y.size());
  for (Eigen::Index j = 0; j < y.size(); ++j) ref(j) = reference(t, dns.x.at(static_cast<int>(j)));
  return relative_error(y, ref);
}

double integrate(const GridField& field) {
  field.validate();
  return trapezoid_weights(field.t).dot(field.values * trapezoid_weights(field.x));
}

double control_effort(const ControlField& control) {
  GridField sq{control.t, control.x, control.values.array().square().matrix()};
  double area = control.t.hi - control.t.lo;
  if (control.x.n > 1) area *= control.x.hi - control.x.lo;
  return integrate(sq) / area;
}

double cost_functional(const ControlProblem& problem, const GridField& y, const GridField& u) {
  y.validate();
  u.validate();
  if (problem.state_dim() != 1 || problem.control_dim() != 1 || problem.domain().spatial_dim() > 1) {
    throw std::invalid_argument("cost_functional: needs a scalar state and control in at most one dimension");
  }
  if (!(y.t == u.t) || !(y.x == u.x)) throw std::invalid_argument("cost_functional: y and u grids differ");
  const int d = problem.domain().spatial_dim();
  auto point = [&](int i, int j) {
    Point p{y.t.at(i), {}};
    if (d == 1) p.x[0] = y.x.at(j);
    return p;
  };
  GridField running{y.t, y.x, Eigen::MatrixXd(y.t.n, y.x.n)};
  for (int i = 0; i < y.t.n; ++i) {
    for (int j = 0; j < y.x.n; ++j) {
      const Dual yv = y.values(i, j);
      const Dual uv = u.values(i, j);
      running.values(i, j) = problem.running_cost(point(i, j), {&yv, 1}, {&uv, 1}).value();
    }
  }
  const Eigen::VectorXd wx = trapezoid_weights(y.x);
  double ends = 0.0;
  for (int j = 0; j < y.x.n; ++j) {
    const Dual first = y.values(0, j);
    const Dual last = y.values(y.t.n - 1, j);
    ends += wx(j) * (problem.initial_cost(point(0, j), {&first, 1}).value() +
                     problem.terminal_cost(point(y.t.n - 1, j), {&last, 1}).value());
  }
  return integrate(running) + ends;
}

void write_error_table(const std::filesystem::path& path, const std::vector<ErrorRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "time,relative_error\n";
  for (const auto& r : rows) out << fmt(r.time) << ',' << fmt(r.relative_error) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace cpinn
