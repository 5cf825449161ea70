#pragma once

#include "cpinn/config.hpp"
#include "cpinn/validators.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cpinn::app {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,      // runtime or I/O error
  kConfigError = 2,  // bad config, flags or missing inputs; nothing written
  kDiverged = 3,     // training stopped on a non-finite or exploding loss
};

struct TrainOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> epochs;
  std::optional<std::filesystem::path> out;
  std::optional<double> diffusivity;
  bool long_mode = false;  // epochs = long_epochs unless --epochs is given
};

/// Applies command-line overrides to a loaded config.
RunConfig resolve(RunConfig config, const TrainOptions& options);

/// Trains and writes the run directory: config.cfg, metrics.csv, timing.csv,
/// checkpoints/, fields/ and plots/.
int train(const TrainOptions& options, std::ostream& log);

struct ValidateOptions {
  std::optional<std::filesystem::path> run_dir;
  std::optional<std::filesystem::path> control;  // heat control CSV instead of a run
  std::optional<double> diffusivity;
  std::optional<std::filesystem::path> out;  // default: <run>/validation
};

int validate(const ValidateOptions& options, std::ostream& log);

/// Re-renders plots/ from the CSVs of a run directory.
int plot(const std::filesystem::path& run_dir, std::ostream& log);

struct ExportOptions {
  std::filesystem::path run_dir;
  std::optional<int> nt;
  std::optional<int> nx;
  std::optional<std::filesystem::path> out;  // default: <run>/export
};

/// Writes y, u, lambda of the final checkpoint as grid CSVs (one file per
/// component).
int export_fields(const ExportOptions& options, std::ostream& log);

/// DNS of the heat equation driven by `control`, compared with the reference
/// state at t = 0.1, 0.2, ..., 1.0.
struct HeatValidation {
  std::vector<ErrorRow> errors;
  double control_effort = 0.0;
  double reference_effort = 0.0;
  DnsSolution dns;
};
HeatValidation validate_heat_control(const ControlField& control, double diffusivity, int dns_nx);

/// Relative L2 error of the prey y2 against its target on each time slice of
/// the probe grid.
std::vector<ErrorRow> prey_error_curve(const ControlPinnParams& params, const ProbeGrid& grid);

/// Analytical problem: RK4 under the learned control versus y*.
struct OdeValidation {
  std::vector<ErrorRow> errors;
  double learned_cost = 0.0;
  double optimal_cost = 0.0;
};
OdeValidation validate_ode_control(const ControlPinnParams& params, int steps);

/// Reads metrics.csv into columns keyed by header name; empty fields are NaN.
std::vector<std::pair<std::string, std::vector<double>>> read_metrics(const std::filesystem::path& path);

/// Applies CTRLPINN_THREADS (if set) to the OpenMP point loops and relaxes glibc's
/// large-block trimming so per-epoch matrices are reused.
void configure_process();

}  // namespace cpinn::app
