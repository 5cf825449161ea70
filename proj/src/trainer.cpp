#include "cpinn/trainer.hpp"

#include "cpinn/autodiff.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace cpinn {

AdamState AdamState::fresh(std::size_t size, const AdamHyper& hyper) {
  const auto n = static_cast<Eigen::Index>(size);
  return {hyper, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0};
}

OptimizerSnapshot AdamState::snapshot() const {
  return {step, hyper.learning_rate, hyper.beta1, hyper.beta2, hyper.epsilon, first_moment, second_moment};
}

AdamState AdamState::restore(const OptimizerSnapshot& s) {
  return {{s.learning_rate, s.beta1, s.beta2, s.epsilon}, s.first_moment, s.second_moment, s.step};
}

void adam_step(AdamState& state, Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& gradient) {
  if (gradient.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  if (!gradient.allFinite()) {
    Eigen::Index worst = 0;
    double worst_mag = -1.0;
    for (Eigen::Index i = 0; i < gradient.size(); ++i) {
      const double g = gradient(i);
      const double mag = std::isfinite(g) ? std::abs(g) : std::numeric_limits<double>::infinity();
      if (std::isnan(g)) {
        worst = i;
        break;
      }
      if (mag > worst_mag) {
        worst_mag = mag;
        worst = i;
      }
    }
    throw NonFiniteGradient(worst, "non-finite gradient at parameter " + std::to_string(worst));
  }
  const auto& h = state.hyper;
  state.step += 1;
  const double k = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(h.beta1, k);
  const double c2 = 1.0 - std::pow(h.beta2, k);
  state.first_moment = h.beta1 * state.first_moment + (1.0 - h.beta1) * gradient;
  state.second_moment = h.beta2 * state.second_moment + (1.0 - h.beta2) * gradient.cwiseProduct(gradient);
  params.array() -= h.learning_rate * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + h.epsilon);
}

ProbeGrid default_probe_grid(const ControlProblem& problem) {
  switch (problem.domain().spatial_dim()) {
    case 0: return {1001, 1};
    case 1: return {101, 101};
    default: return {11, 51};
  }
}

Eigen::MatrixXd probe_points(const Domain& domain, const ProbeGrid& grid) {
  const int d = domain.spatial_dim();
  if (grid.nt < 2 || (d > 0 && grid.nx < 2)) throw std::invalid_argument("probe grid needs >= 2 points per axis");
  Eigen::Index per_t = 1;
  for (int i = 0; i < d; ++i) per_t *= grid.nx;
  Eigen::MatrixXd pts(1 + d, grid.nt * per_t);
  auto coord = [](double lo, double hi, int i, int n) { return lo + (hi - lo) * i / (n - 1); };
  Eigen::Index col = 0;
  for (int it = 0; it < grid.nt; ++it) {
    for (Eigen::Index s = 0; s < per_t; ++s, ++col) {
      pts(0, col) = coord(domain.t0, domain.tf, it, grid.nt);
      Eigen::Index rest = s;
      for (int i = d - 1; i >= 0; --i) {
        const auto k = static_cast<std::size_t>(i);
        pts(1 + i, col) = coord(domain.lower[k], domain.upper[k], static_cast<int>(rest % grid.nx), grid.nx);
        rest /= grid.nx;
      }
    }
  }
  return pts;
}

ProbeErrors evaluate_probe(const ControlPinnParams& params, const ControlProblem& problem, const ProbeGrid& grid) {
  const Eigen::MatrixXd pts = probe_points(problem.domain(), grid);
  const JetBatch out = forward_jets(params, pts, JetLayout(problem.domain().spatial_dim(), {}));
  double num[3] = {0, 0, 0}, den[3] = {0, 0, 0};
  bool have[3] = {false, false, false};
  for (Eigen::Index j = 0; j < pts.cols(); ++j) {
    const Reference ref = problem.reference(column_point(pts, j));
    const std::optional<Eigen::VectorXd>* refs[3] = {&ref.y, &ref.u, &ref.lambda};
    const Eigen::MatrixXd* nets[3] = {&out.y, &out.u, &out.lambda};
    for (int h = 0; h < 3; ++h) {
      if (!*refs[h]) continue;
      have[h] = true;
      num[h] += (nets[h]->col(j) - **refs[h]).squaredNorm();
      den[h] += (**refs[h]).squaredNorm();
    }
  }
  ProbeErrors e;
  std::optional<double>* slots[3] = {&e.y, &e.u, &e.lambda};
  for (int h = 0; h < 3; ++h) {
    if (have[h]) *slots[h] = std::sqrt(num[h]) / std::sqrt(den[h]);
  }
  return e;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::string checkpoint_name(std::uint64_t epoch) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "epoch_%08llu.ckpt", static_cast<unsigned long long>(epoch));
  return buf;
}

}  // namespace

std::string metrics_header() {
  std::string h = "epoch";
  for (auto name : LossBreakdown::kTermNames) h += "," + std::string(name);
  return h + ",total,probe_y,probe_u,probe_lambda";
}

std::string metrics_row(const EpochRecord& r) {
  std::string s = std::to_string(r.epoch);
  for (double v : r.loss.terms()) s += "," + fmt(v);
  s += "," + fmt(r.loss.total);
  if (r.probe) {
    s += "," + opt(r.probe->y) + "," + opt(r.probe->u) + "," + opt(r.probe->lambda);
  } else {
    s += ",,,";
  }
  return s;
}

std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::completed: return "completed";
    case RunStatus::early_stopped: return "early_stopped";
    case RunStatus::diverged: return "diverged";
  }
  return "unknown";
}

RunRecord train(const ControlProblem& problem, const TrainConfig& config, const std::optional<Checkpoint>& resume) {
  config.weights.validate();
  const ArchitectureConfig& arch = config.architecture;
  if (arch.spatial_dim != problem.domain().spatial_dim() || arch.n_y != problem.state_dim() ||
      arch.n_u != problem.control_dim()) {
    throw std::invalid_argument("train: architecture widths do not match the problem");
  }
  if (config.probe_every < 1) throw std::invalid_argument("train: probe_every must be >= 1");
  const ProbeGrid probe = config.probe.value_or(default_probe_grid(problem));

  std::uint64_t start = 0;
  RunRecord record{RunStatus::completed, {}, {}, {}, {},
                   resume ? resume->params : init_params(arch, config.seed), AdamState{}};
  if (resume) {
    if (!(resume->params.config() == arch)) throw std::invalid_argument("train: checkpoint architecture mismatch");
    start = resume->epoch;
    record.optimizer = resume->optimizer ? AdamState::restore(*resume->optimizer)
                                         : AdamState::fresh(record.params.size(), config.adam);
  } else {
    record.optimizer = AdamState::fresh(record.params.size(), config.adam);
  }

  std::ofstream metrics, timing;
  const bool write = !config.output_dir.empty();
  if (write) {
    std::filesystem::create_directories(config.output_dir / "checkpoints");
    const auto mode = resume ? std::ios::app : std::ios::trunc;
    metrics.open(config.output_dir / "metrics.csv", mode);
    timing.open(config.output_dir / "timing.csv", mode);
    if (!metrics || !timing) throw std::runtime_error("train: cannot open output files in " + config.output_dir.string());
    if (!resume) {
      metrics << metrics_header() << '\n';
      timing << "epoch,seconds\n";
    }
  }
  auto save = [&](const std::filesystem::path& path, std::uint64_t epoch) {
    save_checkpoint(path, {epoch, record.params, record.optimizer.snapshot()});
    record.checkpoints.push_back(path);
  };

  record.initial_probe = evaluate_probe(record.params, problem, probe);
  SamplerState sampler{config.seed, start};
  const Domain domain = problem.domain();
  std::uint64_t last = start;

  for (std::uint64_t epoch = start + 1; epoch <= config.epochs; ++epoch) {
    const auto t_begin = std::chrono::steady_clock::now();
    const CollocationBatch batch = sample(domain, config.sizes, sampler);
    EpochRecord row;
    row.epoch = epoch;
    try {
      LossWithGradient lg = evaluate_with_gradient(record.params, problem, batch, config.weights);
      row.loss = lg.breakdown;
      if (!std::isfinite(row.loss.total) || row.loss.total > config.divergence_threshold) {
        record.status = RunStatus::diverged;
        record.message = "loss " + fmt(row.loss.total) + " exceeded the divergence threshold at epoch " +
                         std::to_string(epoch);
      } else {
        adam_step(record.optimizer, record.params.values(), lg.gradient);
      }
    } catch (const EvaluationError& e) {
      record.status = RunStatus::diverged;
      record.message = std::string(e.what()) + " at epoch " + std::to_string(epoch);
    } catch (const std::domain_error& e) {
      record.status = RunStatus::diverged;
      record.message = std::string(e.what()) + " at epoch " + std::to_string(epoch);
    } catch (const NonFiniteGradient& e) {
      record.status = RunStatus::diverged;
      record.message = std::string(e.what()) + " at epoch " + std::to_string(epoch);
    }
    if (record.status == RunStatus::diverged) {
      if (write) metrics << metrics_row(row) << '\n' << std::flush;
      record.epochs.push_back(row);
      break;
    }

    const bool stop_early = config.early_stop_tolerance && row.loss.total < *config.early_stop_tolerance;
    if (epoch % static_cast<std::uint64_t>(config.probe_every) == 0 || epoch == config.epochs || stop_early) {
      row.probe = evaluate_probe(record.params, problem, probe);
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
    if (write) {
      metrics << metrics_row(row) << '\n' << std::flush;
      timing << epoch << ',' << fmt(row.seconds) << '\n';
      if (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0) {
        save(config.output_dir / "checkpoints" / checkpoint_name(epoch), epoch);
      }
    }
    record.epochs.push_back(row);
    last = epoch;
    if (stop_early) {
      record.status = RunStatus::early_stopped;
      break;
    }
  }
  if (write) save(config.output_dir / "checkpoints" / "final.ckpt", last);
  return record;
}

}  // namespace cpinn
