#include "cpinn/app.hpp"

#include "cpinn/svg.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif
#if defined(_OPENMP)
#include <omp.h>
#endif

namespace cpinn::app {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<double> table_times() {
  std::vector<double> t;
  for (int k = 1; k <= 10; ++k) t.push_back(k / 10.0);
  return t;
}

void write_summary(const fs::path& path, const std::vector<std::pair<std::string, double>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "key,value\n";
  for (const auto& [k, v] : rows) out << k << ',' << exact(v) << '\n';
}

void write_prey_error(const fs::path& path, const std::vector<ErrorRow>& rows) { write_error_table(path, rows); }

std::vector<ErrorRow> read_error_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<ErrorRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    rows.push_back({std::strtod(line.c_str(), nullptr), std::strtod(line.c_str() + comma + 1, nullptr)});
  }
  return rows;
}

svg::Series series(const std::string& name, const std::vector<ErrorRow>& rows) {
  svg::Series s{name, {}, {}, false};
  for (const auto& r : rows) {
    s.x.push_back(r.time);
    s.y.push_back(r.relative_error);
  }
  return s;
}

svg::Series column_series(const std::string& name, const GridField& f, int column, bool dashed) {
  svg::Series s{name, {}, {}, dashed};
  for (int i = 0; i < f.t.n; ++i) {
    s.x.push_back(f.t.at(i));
    s.y.push_back(f.values(i, column));
  }
  return s;
}

svg::Series row_series(const std::string& name, const GridField& f, int row, bool dashed) {
  svg::Series s{name, {}, {}, dashed};
  for (int j = 0; j < f.x.n; ++j) {
    s.x.push_back(f.x.at(j));
    s.y.push_back(f.values(row, j));
  }
  return s;
}

svg::Heatmap heatmap(const std::string& title, const GridField& f, std::pair<double, double> range,
                     const std::string& xl = "x", const std::string& yl = "t") {
  return {title, xl, yl, f.x.lo, f.x.hi, f.t.lo, f.t.hi, svg::downsample(f.values, 101, 101), range.first,
          range.second};
}

Eigen::MatrixXd prey_values(const ControlPinnParams& params, const Axis& x, double t, bool target) {
  Eigen::MatrixXd pts(3, static_cast<Eigen::Index>(x.n) * x.n);
  for (int i = 0; i < x.n; ++i) {
    for (int j = 0; j < x.n; ++j) pts.col(static_cast<Eigen::Index>(i) * x.n + j) << t, x.at(i), x.at(j);
  }
  Eigen::MatrixXd out(x.n, x.n);
  if (target) {
    for (int i = 0; i < x.n; ++i) {
      for (int j = 0; j < x.n; ++j) out(i, j) = PredatorPreyProblem::prey_target(t, x.at(i), x.at(j));
    }
    return out;
  }
  const JetBatch jets = forward_jets(params, pts, JetLayout(2, {}));
  for (int i = 0; i < x.n; ++i) {
    for (int j = 0; j < x.n; ++j) out(i, j) = jets.y(1, static_cast<Eigen::Index>(i) * x.n + j);
  }
  return out;
}

/// Writes the learned fields (and references) the plots are drawn from.
void write_fields(const RunConfig& config, const ControlProblem& problem, const ControlPinnParams& params,
                  const fs::path& dir) {
  fs::create_directories(dir);
  const ProbeGrid grid = config.train.probe.value_or(default_probe_grid(problem));
  const int d = problem.domain().spatial_dim();
  if (d <= 1) {
    const Axis t{problem.domain().t0, problem.domain().tf, grid.nt};
    const Axis x = d == 0 ? Axis{0.0, 0.0, 1} : Axis{problem.domain().lower[0], problem.domain().upper[0], grid.nx};
    write_field_csv(dir / "y.csv", sample_network(params, Head::y, 0, t, x));
    write_field_csv(dir / "u.csv", sample_network(params, Head::u, 0, t, x));
    write_field_csv(dir / "lambda.csv", sample_network(params, Head::lambda, 0, t, x));
    const char* names[3] = {"y_ref.csv", "u_ref.csv", "lambda_ref.csv"};
    for (int h = 0; h < 3; ++h) {
      GridField ref{t, x, Eigen::MatrixXd(t.n, x.n)};
      bool have = true;
      for (int i = 0; i < t.n && have; ++i) {
        for (int j = 0; j < x.n && have; ++j) {
          Point p{t.at(i), {x.at(j), 0.0, 0.0}};
          const Reference r = problem.reference(p);
          const auto& v = h == 0 ? r.y : h == 1 ? r.u : r.lambda;
          if (!v) {
            have = false;
          } else {
            ref.values(i, j) = (*v)(0);
          }
        }
      }
      if (have) write_field_csv(dir / names[h], ref);
    }
    return;
  }
  // predator-prey: prey error per time slice and the final-time prey field
  write_prey_error(dir / "prey_error.csv", prey_error_curve(params, grid));
  const Axis x{0.0, 1.0, grid.nx};
  const double tf = problem.domain().tf;
  const Eigen::MatrixXd learned = prey_values(params, x, tf, false);
  const Eigen::MatrixXd target = prey_values(params, x, tf, true);
  // rows x1, columns x2 (the grid file's t axis carries x1)
  write_field_csv(dir / "prey_final.csv", GridField{x, x, learned});
  write_field_csv(dir / "prey_final_target.csv", GridField{x, x, target});
}

int render_plots(const fs::path& run_dir, std::ostream& log) {
  const fs::path metrics = run_dir / "metrics.csv";
  const auto columns = read_metrics(metrics);
  if (columns.empty() || columns.front().second.empty()) {
    log << "error: " << metrics.string() << " has no epochs to plot\n";
    return kConfigError;
  }
  const fs::path plots = run_dir / "plots";
  fs::create_directories(plots);
  const fs::path fields = run_dir / "fields";

  svg::LinePlot loss{"Loss components", "epoch", "weighted loss", true, {}};
  const auto& epochs = columns.front().second;
  for (const auto& [name, values] : columns) {
    if (name == "epoch" || name.rfind("probe_", 0) == 0) continue;
    bool any = false;
    for (double v : values) any = any || v > 0.0;
    if (any) loss.series.push_back({name, epochs, values, name == "total"});
  }
  if (!loss.series.empty()) svg::write_file(plots / "loss_history.svg", svg::render(loss));

  svg::LinePlot probe{"Probe-grid relative L2 error", "epoch", "relative error", true, {}};
  for (const auto& [name, values] : columns) {
    if (name.rfind("probe_", 0) != 0) continue;
    svg::Series s{name.substr(6), {}, {}, false};
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (std::isnan(values[i])) continue;
      s.x.push_back(epochs[i]);
      s.y.push_back(values[i]);
    }
    if (!s.x.empty()) probe.series.push_back(s);
  }
  if (!probe.series.empty()) svg::write_file(plots / "probe_error.svg", svg::render(probe));

  if (fs::exists(fields / "y.csv")) {
    const char* heads[3] = {"y", "u", "lambda"};
    GridField f[3];
    for (int h = 0; h < 3; ++h) f[h] = read_field_csv(fields / (std::string(heads[h]) + ".csv"));
    if (f[0].x.n == 1) {
      for (int h = 0; h < 3; ++h) {
        svg::LinePlot p{std::string(heads[h]) + "(t)", "t", heads[h], false, {}};
        p.series.push_back(column_series("Control PINN", f[h], 0, false));
        const fs::path ref = fields / (std::string(heads[h]) + "_ref.csv");
        if (fs::exists(ref)) p.series.push_back(column_series("reference", read_field_csv(ref), 0, true));
        svg::write_file(plots / (std::string(heads[h]) + ".svg"), svg::render(p));
      }
    } else {
      const auto range = svg::value_range({&f[0].values, &f[1].values});
      svg::write_file(plots / "y_heatmap.svg", svg::render(heatmap("state y", f[0], range)));
      svg::write_file(plots / "u_heatmap.svg", svg::render(heatmap("control u", f[1], range)));
      svg::LinePlot last{"state at final time", "x", "y", false, {}};
      last.series.push_back(row_series("Control PINN", f[0], f[0].t.n - 1, false));
      if (fs::exists(fields / "y_ref.csv")) {
        const GridField ref = read_field_csv(fields / "y_ref.csv");
        last.series.push_back(row_series("reference", ref, ref.t.n - 1, true));
      }
      svg::write_file(plots / "y_final.svg", svg::render(last));
    }
  }
  if (fs::exists(fields / "prey_error.csv")) {
    svg::LinePlot p{"prey relative L2 error", "t", "relative error", false, {}};
    p.series.push_back(series("y2 vs target", read_error_table(fields / "prey_error.csv")));
    svg::write_file(plots / "prey_error.svg", svg::render(p));
    const GridField learned = read_field_csv(fields / "prey_final.csv");
    const GridField target = read_field_csv(fields / "prey_final_target.csv");
    GridField err{learned.t, learned.x, (learned.values - target.values).cwiseAbs()};
    const auto range = svg::value_range({&learned.values, &target.values});
    svg::write_file(plots / "prey_final.svg", svg::render(heatmap("prey y2 at final time", learned, range, "x2", "x1")));
    svg::write_file(plots / "prey_final_target.svg",
                    svg::render(heatmap("prey target at final time", target, range, "x2", "x1")));
    svg::write_file(plots / "prey_final_abs_error.svg",
                    svg::render(heatmap("absolute error", err, svg::value_range({&err.values}), "x2", "x1")));
  }
  log << "plots written to " << plots.string() << "\n";
  return kOk;
}

}  // namespace

RunConfig resolve(RunConfig config, const TrainOptions& o) {
  if (o.seed) config.train.seed = *o.seed;
  if (o.long_mode) config.train.epochs = config.long_epochs;
  if (o.epochs) config.train.epochs = *o.epochs;
  if (o.out) config.train.output_dir = *o.out;
  if (o.diffusivity) {
    if (config.problem != "heat") throw ConfigError(0, "--diffusivity applies to the heat problem only");
    if (!(*o.diffusivity > 0.0)) throw ConfigError(0, "--diffusivity must be > 0");
    config.options.heat.diffusivity = *o.diffusivity;
  }
  return config;
}

int train(const TrainOptions& options, std::ostream& log) {
  RunConfig config;
  try {
    config = resolve(load_config(options.config), options);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  const auto problem = make_problem(config);
  const fs::path dir = config.train.output_dir;
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "config.cfg");
    cfg << to_text(config);
  }
  log << "training " << config.problem << " for " << config.train.epochs << " epochs (seed " << config.train.seed
      << ") into " << dir.string() << "\n";
  const RunRecord record = cpinn::train(*problem, config.train);
  write_fields(config, *problem, record.params, dir / "fields");
  if (!record.epochs.empty()) render_plots(dir, log);

  if (!record.epochs.empty()) {
    const auto& last = record.epochs.back();
    log << "final loss " << fmt(last.loss.total);
    if (last.probe) {
      if (last.probe->y) log << "  probe y " << fmt(*last.probe->y);
      if (last.probe->u) log << "  u " << fmt(*last.probe->u);
      if (last.probe->lambda) log << "  lambda " << fmt(*last.probe->lambda);
    }
    log << "\n";
  }
  log << "status: " << to_string(record.status) << (record.message.empty() ? "" : " (" + record.message + ")")
      << "\n";
  return record.status == RunStatus::diverged ? kDiverged : kOk;
}

HeatValidation validate_heat_control(const ControlField& control, double diffusivity, int dns_nx) {
  HeatValidation v;
  DnsOptions o;
  o.nx = dns_nx;
  o.output_times = table_times();
  v.dns = solve_heat_dns(control, diffusivity, HeatProblem::initial_profile, o);
  for (double t : o.output_times) v.errors.push_back({t, relative_error_at(v.dns, HeatProblem::reference_state, t)});
  v.control_effort = control_effort(control);
  v.reference_effort = control_effort(GridField::sample(HeatProblem::reference_control, control.t, control.x));
  return v;
}

std::vector<ErrorRow> prey_error_curve(const ControlPinnParams& params, const ProbeGrid& grid) {
  const PredatorPreyProblem problem;
  const Eigen::MatrixXd pts = probe_points(problem.domain(), grid);
  const JetBatch jets = forward_jets(params, pts, JetLayout(2, {}));
  const Eigen::Index per_t = pts.cols() / grid.nt;
  std::vector<ErrorRow> rows;
  for (int k = 0; k < grid.nt; ++k) {
    Eigen::VectorXd a(per_t), b(per_t);
    for (Eigen::Index s = 0; s < per_t; ++s) {
      const Eigen::Index c = k * per_t + s;
      a(s) = jets.y(1, c);
      b(s) = PredatorPreyProblem::prey_target(pts(0, c), pts(1, c), pts(2, c));
    }
    rows.push_back({pts(0, k * per_t), relative_error(a, b)});
  }
  return rows;
}

OdeValidation validate_ode_control(const ControlPinnParams& params, int steps) {
  const AnalyticalProblem problem;
  // control on the half-step grid so RK4's midpoint samples are exact nodes
  const GridField u_half = sample_network(params, Head::u, 0, {0.0, 1.0, 2 * steps + 1}, {0.0, 0.0, 1});
  auto control = [&](double t) { return u_half(t, 0.0); };
  const OdeRhs f = [](double, const Eigen::VectorXd& y, double u) {
    return Eigen::VectorXd::Constant(1, 0.5 * y(0) + u);
  };
  const Trajectory tr = integrate_ode(f, Eigen::VectorXd::Ones(1), control, 0.0, 1.0, steps);
  OdeValidation v;
  for (double t : table_times()) {
    const auto k = static_cast<std::size_t>(std::lround(t * steps));
    const double ref = AnalyticalProblem::optimal_state(t);
    v.errors.push_back({t, std::abs(tr.states[k](0) - ref) / std::abs(ref)});
  }
  const Axis t{0.0, 1.0, steps + 1};
  const Axis x{0.0, 0.0, 1};
  GridField y{t, x, Eigen::MatrixXd(steps + 1, 1)};
  GridField u{t, x, Eigen::MatrixXd(steps + 1, 1)};
  for (int i = 0; i <= steps; ++i) {
    y.values(i, 0) = tr.states[static_cast<std::size_t>(i)](0);
    u.values(i, 0) = control(t.at(i));
  }
  v.learned_cost = cost_functional(problem, y, u);
  v.optimal_cost = cost_functional(problem, GridField::sample([](double s, double) { return AnalyticalProblem::optimal_state(s); }, t, x),
                                   GridField::sample([](double s, double) { return AnalyticalProblem::optimal_control(s); }, t, x));
  return v;
}

int validate(const ValidateOptions& options, std::ostream& log) {
  if (options.control) {
    if (!fs::exists(*options.control)) {
      log << "error: control file " << options.control->string() << " not found\n";
      return kConfigError;
    }
    const double a = options.diffusivity.value_or(HeatOptions{}.diffusivity);
    const HeatValidation v = validate_heat_control(read_field_csv(*options.control), a, 1001);
    log << "time,relative_error\n";
    for (const auto& r : v.errors) log << fmt(r.time) << ',' << fmt(r.relative_error) << "\n";
    log << "control effort " << fmt(v.control_effort) << " (reference " << fmt(v.reference_effort) << ")\n";
    if (options.out) {
      fs::create_directories(*options.out);
      write_error_table(*options.out / "dns_error.csv", v.errors);
    }
    return kOk;
  }
  if (!options.run_dir) {
    log << "error: validate needs a run directory or --control\n";
    return kConfigError;
  }
  const fs::path run = *options.run_dir;
  const fs::path ckpt = run / "checkpoints" / "final.ckpt";
  if (!fs::exists(run / "config.cfg") || !fs::exists(ckpt)) {
    log << "error: " << run.string() << " is not a run directory (needs config.cfg and checkpoints/final.ckpt)\n";
    return kConfigError;
  }
  RunConfig config;
  try {
    config = load_config(run / "config.cfg");
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  const Checkpoint checkpoint = load_checkpoint(ckpt);
  const fs::path out = options.out.value_or(run / "validation");
  fs::create_directories(out);

  if (config.problem == "heat") {
    const double a = options.diffusivity.value_or(config.options.heat.diffusivity);
    const ControlField u = sample_network(checkpoint.params, Head::u, 0, {0.0, 1.0, config.validate.control_nt},
                                          {0.0, 1.0, config.validate.control_nx});
    write_field_csv(out / "control.csv", u);
    const HeatValidation v = validate_heat_control(u, a, config.validate.dns_nx);
    write_error_table(out / "dns_error.csv", v.errors);
    write_summary(out / "summary.csv", {{"diffusivity", a},
                                        {"control_effort", v.control_effort},
                                        {"reference_effort", v.reference_effort},
                                        {"dns_dt", v.dns.dt},
                                        {"dns_dx", v.dns.dx}});
    svg::LinePlot err{"DNS relative error vs reference", "t", "relative error", true, {series("DNS", v.errors)}};
    svg::write_file(out / "dns_error.svg", svg::render(err));
    svg::LinePlot fin{"state at t = 1", "x", "y", false, {}};
    svg::Series dns{"DNS with learned control", {}, {}, false};
    svg::Series ref{"reference", {}, {}, true};
    const Eigen::VectorXd y1 = v.dns.at(1.0);
    for (int j = 0; j < v.dns.x.n; ++j) {
      dns.x.push_back(v.dns.x.at(j));
      dns.y.push_back(y1(j));
      ref.x.push_back(v.dns.x.at(j));
      ref.y.push_back(HeatProblem::reference_state(1.0, v.dns.x.at(j)));
    }
    fin.series = {dns, ref};
    svg::write_file(out / "dns_final.svg", svg::render(fin));
    log << "time,relative_error\n";
    for (const auto& r : v.errors) log << fmt(r.time) << ',' << fmt(r.relative_error) << "\n";
    log << "control effort: Control PINN " << fmt(v.control_effort) << ", reference " << fmt(v.reference_effort)
        << "\n";
  } else if (config.problem == "analytical") {
    const OdeValidation v = validate_ode_control(checkpoint.params, config.validate.ode_steps);
    write_error_table(out / "ode_error.csv", v.errors);
    write_summary(out / "summary.csv", {{"learned_cost", v.learned_cost}, {"optimal_cost", v.optimal_cost}});
    svg::LinePlot err{"RK4 relative error under learned control", "t", "relative error", true,
                      {series("RK4", v.errors)}};
    svg::write_file(out / "ode_error.svg", svg::render(err));
    log << "time,relative_error\n";
    for (const auto& r : v.errors) log << fmt(r.time) << ',' << fmt(r.relative_error) << "\n";
    log << "cost: learned control " << fmt(v.learned_cost) << ", optimal " << fmt(v.optimal_cost) << "\n";
  } else {
    const ProbeGrid grid = config.train.probe.value_or(ProbeGrid{11, 51});
    const auto rows = prey_error_curve(checkpoint.params, grid);
    write_error_table(out / "prey_error.csv", rows);
    svg::LinePlot err{"prey relative L2 error", "t", "relative error", false, {series("y2 vs target", rows)}};
    svg::write_file(out / "prey_error.svg", svg::render(err));
    log << "time,relative_error\n";
    for (const auto& r : rows) log << fmt(r.time) << ',' << fmt(r.relative_error) << "\n";
  }
  log << "validation written to " << out.string() << "\n";
  return kOk;
}

int plot(const fs::path& run_dir, std::ostream& log) {
  if (!fs::exists(run_dir / "metrics.csv")) {
    log << "error: " << (run_dir / "metrics.csv").string() << " not found\n";
    return kConfigError;
  }
  return render_plots(run_dir, log);
}

int export_fields(const ExportOptions& options, std::ostream& log) {
  const fs::path ckpt = options.run_dir / "checkpoints" / "final.ckpt";
  if (!fs::exists(options.run_dir / "config.cfg") || !fs::exists(ckpt)) {
    log << "error: " << options.run_dir.string() << " is not a run directory\n";
    return kConfigError;
  }
  RunConfig config;
  try {
    config = load_config(options.run_dir / "config.cfg");
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  const auto problem = make_problem(config);
  const Domain dom = problem->domain();
  if (dom.spatial_dim() > 1) {
    log << "error: export supports problems with at most one spatial dimension\n";
    return kConfigError;
  }
  const int nt = options.nt.value_or(config.validate.control_nt);
  const int nx = dom.spatial_dim() == 0 ? 1 : options.nx.value_or(config.validate.control_nx);
  if (nt < 2 || nx < 1 || (dom.spatial_dim() == 1 && nx < 2)) {
    log << "error: export grid too small\n";
    return kConfigError;
  }
  const Checkpoint checkpoint = load_checkpoint(ckpt);
  const fs::path out = options.out.value_or(options.run_dir / "export");
  fs::create_directories(out);
  const Axis t{dom.t0, dom.tf, nt};
  const Axis x = dom.spatial_dim() == 0 ? Axis{0.0, 0.0, 1} : Axis{dom.lower[0], dom.upper[0], nx};
  const std::pair<Head, const char*> heads[3] = {{Head::y, "y"}, {Head::u, "u"}, {Head::lambda, "lambda"}};
  for (const auto& [head, name] : heads) {
    const int width = head == Head::u ? problem->control_dim() : problem->state_dim();
    for (int c = 0; c < width; ++c) {
      const std::string file = width == 1 ? std::string(name) + ".csv" : std::string(name) + std::to_string(c + 1) + ".csv";
      write_field_csv(out / file, sample_network(checkpoint.params, head, c, t, x));
    }
  }
  log << "fields written to " << out.string() << "\n";
  return kOk;
}

std::vector<std::pair<std::string, std::vector<double>>> read_metrics(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::pair<std::string, std::vector<double>>> cols;
  std::string line;
  if (!std::getline(in, line)) return cols;
  {
    std::stringstream ss(line);
    std::string name;
    while (std::getline(ss, name, ',')) cols.push_back({name, {}});
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t start = 0;
    for (auto& col : cols) {
      const auto end = line.find(',', start);
      const std::string cell = line.substr(start, end == std::string::npos ? std::string::npos : end - start);
      col.second.push_back(cell.empty() ? std::numeric_limits<double>::quiet_NaN() : std::strtod(cell.c_str(), nullptr));
      start = end == std::string::npos ? line.size() : end + 1;
    }
  }
  return cols;
}

void configure_process() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  if (const char* env = std::getenv("CTRLPINN_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) {
#if defined(_OPENMP)
      omp_set_num_threads(n);
#endif
    }
  }
}

}  // namespace cpinn::app
