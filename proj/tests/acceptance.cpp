// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance            all criteria
//   acceptance 1 2 8      a subset
//
// Training artifacts go to $CTRLPINN_ACCEPTANCE_DIR (default: ./acceptance_runs).

#include "cpinn/app.hpp"
#include "cpinn/config.hpp"
#include "cpinn/loss.hpp"
#include "cpinn/random.hpp"
#include "cpinn/trainer.hpp"
#include "cpinn/validators.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace cpinn;
namespace fs = std::filesystem;
using std::numbers::pi;

namespace {

const fs::path kSource = CTRLPINN_SOURCE_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}
std::string g(double v) { return fmt("%.4g", v); }

class Clock {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

fs::path work_dir() {
  const char* env = std::getenv("CTRLPINN_ACCEPTANCE_DIR");
  return env ? fs::path(env) : fs::current_path() / "acceptance_runs";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunRecord train_config(const fs::path& config, const fs::path& out, std::optional<std::uint64_t> epochs = {},
                       std::uint64_t checkpoint_every = 0) {
  RunConfig c = load_config(config);
  if (epochs) c.train.epochs = *epochs;
  c.train.output_dir = out;
  c.train.checkpoint_every = checkpoint_every;
  fs::remove_all(out);
  const auto problem = make_problem(c);
  return train(*problem, c.train);
}

// 1. Closed-form residuals of the analytical problem.
Outcome closed_form() {
  const Clock clock;
  const AnalyticalProblem prob;
  const double e3 = std::exp(3.0);
  auto y = [&](double t) { return (2 * std::exp(1.5 * t) + e3 * std::exp(-1.5 * t)) / (2 + e3); };
  auto yd = [&](double t) { return (3 * std::exp(1.5 * t) - 1.5 * e3 * std::exp(-1.5 * t)) / (2 + e3); };
  auto u = [&](double t) { return 2 * (std::exp(1.5 * t) - e3 * std::exp(-1.5 * t)) / (2 + e3); };
  auto ud = [&](double t) { return 3 * (std::exp(1.5 * t) + e3 * std::exp(-1.5 * t)) / (2 + e3); };
  auto jet = [](double v, double d) {
    LocalJet j(1, 0, true, 0);
    j.value(0) = v;
    j.dt(0) = d;
    return j;
  };
  double worst = 0.0;
  auto track = [&](const std::vector<Dual>& r) {
    for (const Dual& v : r) worst = std::max(worst, std::abs(v.value()));
  };
  CounterRng rng(2024, 0, 0);
  for (int k = 0; k < 1000; ++k) {
    const double t = rng.uniform();
    const Point p{t, {}};
    const Dual uv[] = {u(t)}, yv[] = {y(t)}, lv[] = {-u(t)};
    track(forward_residual(prob, p, jet(y(t), yd(t)), uv));
    track(adjoint_residual(prob, p, jet(-u(t), -ud(t)), jet(y(t), yd(t)), uv));
    track(optimality_residual(prob, p, lv, yv, uv));
  }
  const Dual y0[] = {y(0.0)}, l0[] = {-u(0.0)}, y1[] = {y(1.0)}, l1[] = {-u(1.0)};
  track(condition_residuals(prob, ConditionKind::initial, Point{0.0, {}}, y0, l0).initial);
  track(condition_residuals(prob, ConditionKind::terminal, Point{1.0, {}}, y1, l1).terminal_adjoint);
  const double s = clock.seconds();
  return {worst <= 1e-9 && s < 1.0, "max |residual| " + g(worst) + " (<= 1e-9), " + fmt("%.3f", s) + " s (< 1 s)"};
}

// Signs of every ELU preactivation at (t, x), following the network wiring.
std::vector<bool> kink_signs(const ControlPinnParams& p, double t, const std::vector<double>& x) {
  std::vector<bool> signs;
  auto layer = [&](int l, const Eigen::VectorXd& in) {
    Eigen::VectorXd z = p.weight(l) * in + p.bias(l);
    if (!p.layers()[static_cast<std::size_t>(l)].activated) return z;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      signs.push_back(z(i) < 0);
      if (z(i) < 0) z(i) = std::expm1(z(i));
    }
    return z;
  };
  Eigen::VectorXd h(1 + static_cast<Eigen::Index>(x.size()));
  h(0) = t;
  for (std::size_t i = 0; i < x.size(); ++i) h(static_cast<Eigen::Index>(i) + 1) = x[i];
  for (int l = p.trunk_begin(); l < p.y_head(); ++l) h = layer(l, h);
  const Eigen::VectorXd y = layer(p.y_head(), h);
  Eigen::VectorXd c(y.size() + h.size());
  c << y, h;
  for (int l = p.control_begin(); l < p.u_head(); ++l) c = layer(l, c);
  const Eigen::VectorXd u = layer(p.u_head(), c);
  Eigen::VectorXd a(y.size() + u.size() + c.size());
  a << y, u, c;
  for (int l = p.adjoint_begin(); l < p.lambda_head(); ++l) a = layer(l, a);
  return signs;
}

// 2. Jets and full-loss gradients against central differences.
Outcome autodiff_oracle() {
  const Clock clock;
  double worst_jet = 0.0, worst_grad = 0.0;
  int tried = 0;
  for (const char* id : {"analytical", "heat", "predator_prey"}) {
    const auto prob = make_problem(id);
    ControlPinnParams p = init_params(prob->architecture(), 5);
    CounterRng perturb(5, 901, 0);
    for (Eigen::Index i = 0; i < p.values().size(); ++i) p.values()(i) += perturb.uniform(-0.05, 0.05);
    const int d = prob->domain().spatial_dim();

    // ELU'' jumps at 0, so the difference quotients are only an oracle at
    // points whose stencil keeps every preactivation on one side.
    CounterRng where(6, 902, 0);
    for (int k = 0; k < 3;) {
      const double t = where.uniform(0.1, 0.9);
      std::vector<double> x(static_cast<std::size_t>(d));
      for (double& v : x) v = where.uniform(0.1, 0.9);
      const std::vector<bool> center = kink_signs(p, t, x);
      bool smooth = kink_signs(p, t + 1e-4, x) == center && kink_signs(p, t - 1e-4, x) == center;
      for (int i = 0; i < d; ++i) {
        for (double step : {-1e-3, 1e-3}) {
          auto xs = x;
          xs[static_cast<std::size_t>(i)] += step;
          smooth = smooth && kink_signs(p, t, xs) == center;
        }
      }
      ++tried;
      if (!smooth) continue;
      ++k;
      const HeadJets j = jet_eval(p, t, x, {true, d > 0 ? 2 : 0});
      const Jet* heads[] = {&j.y, &j.u, &j.lambda};
      auto out = [&](int h, int c, double tt, const std::vector<double>& xx) {
        const NetworkOutputs o = forward(p, tt, xx);
        return h == 0 ? o.y(c) : h == 1 ? o.u(c) : o.lambda(c);
      };
      auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-2); };
      for (int h = 0; h < 3; ++h) {
        for (int c = 0; c < static_cast<int>(heads[h]->value.size()); ++c) {
          const double h1 = 1e-4, h2 = 1e-3;
          worst_jet = std::max(worst_jet, rel(heads[h]->d_dt(c), (out(h, c, t + h1, x) - out(h, c, t - h1, x)) / (2 * h1)));
          for (int i = 0; i < d; ++i) {
            auto xp = x, xm = x, xp2 = x, xm2 = x;
            xp[static_cast<std::size_t>(i)] += h1;
            xm[static_cast<std::size_t>(i)] -= h1;
            xp2[static_cast<std::size_t>(i)] += h2;
            xm2[static_cast<std::size_t>(i)] -= h2;
            worst_jet = std::max(worst_jet, rel(heads[h]->d_dx(c, i), (out(h, c, t, xp) - out(h, c, t, xm)) / (2 * h1)));
            const double fd2 = (out(h, c, t, xp2) - 2 * out(h, c, t, x) + out(h, c, t, xm2)) / (h2 * h2);
            worst_jet = std::max(worst_jet, rel(heads[h]->d2_dx2(c, i), fd2));
          }
        }
      }
    }

    SamplerState st{7, 0};
    const CollocationBatch batch = sample(prob->domain(), {8, 8, 8, 8}, st);
    const LossWeights w;
    const LossWithGradient lg = evaluate_with_gradient(p, *prob, batch, w);
    CounterRng dirs(8, 903, 0);
    for (int k = 0; k < 10; ++k) {
      Eigen::VectorXd dir(lg.gradient.size());
      for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = dirs.uniform(-1.0, 1.0);
      dir.normalize();
      ControlPinnParams a = p, b = p;
      a.values() += 1e-4 * dir;
      b.values() -= 1e-4 * dir;
      const double fd = (evaluate(a, *prob, batch, w).total - evaluate(b, *prob, batch, w).total) / 2e-4;
      worst_grad = std::max(worst_grad, std::abs(lg.gradient.dot(dir) - fd) / std::max(std::abs(fd), 1e-8));
    }
  }
  const double s = clock.seconds();
  return {worst_jet <= 1e-4 && worst_grad <= 1e-4 && s < 30.0,
          "worst jet rel " + g(worst_jet) + " (9 kink-free points of " + std::to_string(tried) +
              "), worst gradient rel " + g(worst_grad) + " (<= 1e-4), " +
              fmt("%.1f", s) + " s (< 30 s)"};
}

// 3. Analytical training with the shipped config.
Outcome analytical_training(const fs::path& dir) {
  const Clock clock;
  const RunRecord r = train_config(kSource / "configs/analytical.cfg", dir / "analytical");
  const double s = clock.seconds();
  if (r.epochs.empty() || !r.epochs.back().probe) return {false, "run produced no final probe"};
  const ProbeErrors& e = *r.epochs.back().probe;
  const bool ok = e.y && e.u && e.lambda && *e.y <= 5e-2 && *e.u <= 5e-2 && *e.lambda <= 5e-2;
  return {ok && r.epochs.size() == 300 && s <= 300.0,
          std::to_string(r.epochs.size()) + " epochs, seed 1: y " + g(e.y.value_or(NAN)) + ", u " +
              g(e.u.value_or(NAN)) + ", lambda " + g(e.lambda.value_or(NAN)) + " (each <= 5e-2), " + fmt("%.0f", s) +
              " s (<= 300 s)"};
}

// 4. Heat reference pair against the forward residual.
Outcome heat_reference_pair() {
  auto worst = [](double a) {
    const HeatProblem prob({a});
    const double c = 2 / (pi + 4 * pi * pi * pi);
    double m = 0.0;
    for (int i = 0; i < 100; ++i) {
      for (int k = 0; k < 100; ++k) {
        const double t = (i + 0.5) / 100, x = (k + 0.5) / 100;
        const double T = std::exp(-pi * pi * t) - std::cos(pi * t / 2) + 2 * pi * std::sin(pi * t / 2);
        const double Td = -pi * pi * std::exp(-pi * pi * t) + pi / 2 * std::sin(pi * t / 2) + pi * pi * std::cos(pi * t / 2);
        LocalJet y(1, 1, true, 2);
        y.value(0) = c * T * std::sin(pi * x);
        y.dt(0) = c * Td * std::sin(pi * x);
        y.dx(0, 0) = c * T * pi * std::cos(pi * x);
        y.dxx(0, 0) = -pi * pi * c * T * std::sin(pi * x);
        const Dual u[] = {HeatProblem::reference_control(t, x)};
        m = std::max(m, std::abs(forward_residual(prob, Point{t, {x}}, y, u)[0].value()));
      }
    }
    return m;
  };
  const double one = worst(1.0), stated = worst(0.1);
  return {one <= 1e-8 && stated > 0.1,
          "max residual " + g(one) + " at diffusivity 1 (<= 1e-8), " + g(stated) + " at 0.1 (> 0.1)"};
}

struct HeatRuns {
  bool done = false;
  app::HeatValidation long_mode;
  app::HeatValidation short_mode;
  double long_seconds = 0.0;
  double short_seconds = 0.0;
};

app::HeatValidation validate_checkpoint(const fs::path& ckpt, const RunConfig& cfg) {
  const Checkpoint c = load_checkpoint(ckpt);
  const ControlField u = sample_network(c.params, Head::u, 0, {0.0, 1.0, cfg.validate.control_nt},
                                        {0.0, 1.0, cfg.validate.control_nx});
  return app::validate_heat_control(u, cfg.options.heat.diffusivity, cfg.validate.dns_nx);
}

// The long run is checkpointed at 1500 epochs; with identical seed and config
// its parameters there are those of the 1500-epoch short run.
HeatRuns& heat_runs(const fs::path& dir) {
  static HeatRuns runs;
  if (runs.done) return runs;
  const fs::path config = kSource / "configs/heat.cfg";
  const RunConfig cfg = load_config(config);
  const fs::path out = dir / "heat_long";
  const RunRecord r = train_config(config, out, cfg.long_epochs, 500);
  double elapsed = 0.0;
  for (const EpochRecord& e : r.epochs) {
    elapsed += e.seconds;
    if (e.epoch == cfg.train.epochs) runs.short_seconds = elapsed;
  }
  runs.long_seconds = elapsed;
  runs.long_mode = validate_checkpoint(out / "checkpoints" / "final.ckpt", cfg);
  char name[32];
  std::snprintf(name, sizeof(name), "epoch_%08llu.ckpt", static_cast<unsigned long long>(cfg.train.epochs));
  runs.short_mode = validate_checkpoint(out / "checkpoints" / name, cfg);
  for (const auto* v : {&runs.long_mode, &runs.short_mode}) {
    write_error_table(out / (v == &runs.long_mode ? "dns_error_long.csv" : "dns_error_short.csv"), v->errors);
  }
  runs.done = true;
  return runs;
}

// 5. DNS under the learned heat control.
Outcome heat_dns(const fs::path& dir) {
  const HeatRuns& h = heat_runs(dir);
  const auto& e = h.long_mode.errors;
  bool monotone = true;
  for (std::size_t k = 1; k < e.size(); ++k) {
    if (e[k - 1].time >= 0.2 - 1e-12 && e[k].relative_error > e[k - 1].relative_error) monotone = false;
  }
  const double long_final = e.back().relative_error;
  const double short_final = h.short_mode.errors.back().relative_error;
  std::string table;
  for (const ErrorRow& row : e) table += (table.empty() ? "" : " ") + fmt("%.1f:", row.time) + g(row.relative_error);
  const bool ok = long_final <= 0.05 && monotone && h.long_seconds <= 45 * 60 && short_final <= 0.15 &&
                  h.short_seconds <= 8 * 60;
  return {ok, "long (10000 epochs): t=1 error " + g(long_final) + " (<= 0.05), decreasing for t >= 0.2: " +
                  (monotone ? "yes" : "no") + ", " + fmt("%.0f", h.long_seconds) + " s (<= 2700 s); short (1500): " +
                  g(short_final) + " (<= 0.15), " + fmt("%.0f", h.short_seconds) + " s (<= 480 s); errors " + table};
}

// 6. Control effort of the learned heat control.
Outcome heat_effort(const fs::path& dir) {
  const HeatRuns& h = heat_runs(dir);
  const double learned = h.long_mode.control_effort, ref = h.long_mode.reference_effort;
  return {learned <= 1.05 * ref && std::abs(ref - 0.2497) <= 1e-3,
          "learned " + g(learned) + " <= 1.05 x reference " + g(ref) + "; reference within 0.2497 +- 0.001"};
}

// 7. Predator-prey prey tracking at desk scale.
Outcome predator_prey(const fs::path& dir) {
  const Clock clock;
  const fs::path out = dir / "predator_prey";
  const RunRecord r = train_config(kSource / "configs/predator_prey.cfg", out);
  const std::vector<ErrorRow> curve = app::prey_error_curve(r.params, {11, 51});
  write_error_table(out / "prey_error.csv", curve);
  const double s = clock.seconds();
  const double last = curve.back().relative_error;
  bool is_min = true;
  for (const ErrorRow& row : curve) {
    if (row.time >= 0.5 - 1e-12 && row.relative_error < last) is_min = false;
  }
  std::string table;
  for (const ErrorRow& row : curve) table += (table.empty() ? "" : " ") + fmt("%.1f:", row.time) + g(row.relative_error);
  return {last <= 0.2 && is_min && r.epochs.size() == 2000 && s <= 3600.0,
          std::to_string(r.epochs.size()) + " epochs: t=1 prey error " + g(last) + " (<= 0.2), minimum over t >= 0.5: " +
              (is_min ? "yes" : "no") + ", " + fmt("%.0f", s) + " s (<= 3600 s); errors " + table};
}

// 8. Solver convergence orders.
Outcome solver_orders() {
  auto mode_error = [](int nx) {
    DnsOptions o;
    o.nx = nx;
    o.output_times = {0.1};
    const GridField zero = GridField::sample([](double, double) { return 0.0; }, {0, 0.1, 2}, {0, 1, 2});
    const DnsSolution s = solve_heat_dns(zero, 1.0, [](double x) { return std::sin(pi * x); }, o);
    double m = 0.0;
    for (int j = 0; j < nx; ++j) {
      m = std::max(m, std::abs(s.state(0, j) - std::exp(-pi * pi * 0.1) * std::sin(pi * s.x.at(j))));
    }
    return m;
  };
  const double e3 = std::exp(3.0);
  auto u = [&](double t) { return 2 * (std::exp(1.5 * t) - e3 * std::exp(-1.5 * t)) / (2 + e3); };
  const OdeRhs f = [](double, const Eigen::VectorXd& y, double c) { return Eigen::VectorXd((0.5 * y.array() + c).matrix()); };
  auto rk4_error = [&](int steps) {
    const Trajectory tr = integrate_ode(f, Eigen::VectorXd::Ones(1), u, 0.0, 1.0, steps);
    return std::abs(tr.states.back()(0) - AnalyticalProblem::optimal_state(1.0));
  };
  const double dns = mode_error(51) / mode_error(101);
  const double rk4 = rk4_error(10) / rk4_error(20);
  return {dns >= 3 && dns <= 5 && rk4 >= 12 && rk4 <= 20,
          "DNS dx-halving ratio " + g(dns) + " (in [3, 5]), RK4 dt-halving ratio " + g(rk4) + " (in [12, 20])"};
}

// 9. Bitwise reproducible metrics.
Outcome reproducibility(const fs::path& dir) {
  const fs::path first = dir / "analytical" / "metrics.csv";
  if (!fs::exists(first)) train_config(kSource / "configs/analytical.cfg", dir / "analytical");
  train_config(kSource / "configs/analytical.cfg", dir / "analytical_repeat");
  const std::string a = slurp(first), b = slurp(dir / "analytical_repeat" / "metrics.csv");
  return {!a.empty() && a == b, "analytical config twice: metrics.csv " + std::to_string(a.size()) + " bytes, " +
                                    (a == b ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
  app::configure_process();
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  const fs::path dir = work_dir();
  fs::create_directories(dir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"closed-form residuals", closed_form},
      {"autodiff vs finite differences", autodiff_oracle},
      {"analytical training", [&] { return analytical_training(dir); }},
      {"heat reference pair", heat_reference_pair},
      {"heat DNS validation", [&] { return heat_dns(dir); }},
      {"heat control effort", [&] { return heat_effort(dir); }},
      {"predator-prey prey tracking", [&] { return predator_prey(dir); }},
      {"solver convergence orders", solver_orders},
      {"reproducible metrics", [&] { return reproducibility(dir); }},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
