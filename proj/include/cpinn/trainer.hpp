#pragma once

#include "cpinn/loss.hpp"
#include "cpinn/network.hpp"
#include "cpinn/problems.hpp"
#include "cpinn/sampler.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpinn {

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamHyper hyper;
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  std::uint64_t step = 0;

  static AdamState fresh(std::size_t size, const AdamHyper& hyper);
  OptimizerSnapshot snapshot() const;
  static AdamState restore(const OptimizerSnapshot& snapshot);
};

class NonFiniteGradient : public std::runtime_error {
 public:
  NonFiniteGradient(Eigen::Index index, const std::string& what) : std::runtime_error(what), index_(index) {}
  /// Index of the entry with the largest |g| (a NaN wins).
  Eigen::Index index() const { return index_; }

 private:
  Eigen::Index index_;
};

/// Bias-corrected ADAM update of `params` in place.
void adam_step(AdamState& state, Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& gradient);

/// Regular grid the learned fields are compared on.
struct ProbeGrid {
  int nt = 1001;
  int nx = 1;  // points per spatial axis
};

/// Per-problem default: 1001 in t (ODE), 101 x 101 (heat), 11 x 51 x 51
/// (predator-prey).
ProbeGrid default_probe_grid(const ControlProblem& problem);

/// Relative L2 errors of the network outputs against whatever references the
/// problem provides.
struct ProbeErrors {
  std::optional<double> y;
  std::optional<double> u;
  std::optional<double> lambda;
};

/// Probe-grid points, (1 + spatial_dim) x (nt * nx^d), t slowest.
Eigen::MatrixXd probe_points(const Domain& domain, const ProbeGrid& grid);

ProbeErrors evaluate_probe(const ControlPinnParams& params, const ControlProblem& problem, const ProbeGrid& grid);

struct TrainConfig {
  std::uint64_t epochs = 300;
  std::uint64_t seed = 1;
  SampleSizes sizes;
  LossWeights weights;
  AdamHyper adam;
  ArchitectureConfig architecture;  // widths must agree with the problem
  std::optional<ProbeGrid> probe;
  int probe_every = 50;
  std::uint64_t checkpoint_every = 0;  // 0: final checkpoint only
  double divergence_threshold = 1e6;
  std::optional<double> early_stop_tolerance;
  std::filesystem::path output_dir;  // empty: keep everything in memory
};

struct EpochRecord {
  std::uint64_t epoch = 0;
  LossBreakdown loss;
  double seconds = 0.0;
  std::optional<ProbeErrors> probe;
};

enum class RunStatus { completed, early_stopped, diverged };

struct RunRecord {
  RunStatus status = RunStatus::completed;
  std::string message;
  ProbeErrors initial_probe;
  std::vector<EpochRecord> epochs;
  std::vector<std::filesystem::path> checkpoints;
  ControlPinnParams params;
  AdamState optimizer;
};

/// Resample, evaluate, backpropagate, update; one batch per epoch.
///
/// Epoch k evaluates the loss on batch k - 1 (sampler substream k - 1) at the
/// parameters before update k. If `resume` is given the run continues after
/// its epoch with its parameters and optimizer state.
///
/// With an output directory the run writes metrics.csv (one row per epoch),
/// timing.csv, and checkpoints/epoch_NNNNNNNN.ckpt plus final.ckpt.
RunRecord train(const ControlProblem& problem, const TrainConfig& config,
                const std::optional<Checkpoint>& resume = std::nullopt);

/// Header and row format of metrics.csv. Values use %.17g; absent probe
/// values are empty fields.
std::string metrics_header();
std::string metrics_row(const EpochRecord& record);

std::string to_string(RunStatus status);

}  // namespace cpinn
