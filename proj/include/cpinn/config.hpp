#pragma once

#include "cpinn/problems.hpp"
#include "cpinn/trainer.hpp"

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>

namespace cpinn {

/// Run configuration file: `key = value` lines, `[section]` headers, `#`
/// comments. Keys (section.key):
///
///   problem, epochs, long_epochs, seed, out
///   architecture.{width, trunk_layers, control_layers, adjoint_layers, activation}
///   sampler.{interior, initial, terminal, boundary}
///   loss.{data, forward, adjoint, optimality, initial, terminal_adjoint, boundary}
///   optimizer.{learning_rate, beta1, beta2, epsilon}
///   probe.{nt, nx, every}
///   run.{checkpoint_every, divergence_threshold, early_stop_tolerance}
///   heat.{diffusivity, initial_tracking_weight, terminal_tracking_weight, control_weight}
///   predator_prey.{tracking_weight, control_weight, track_predator}
///   validate.{control_nt, control_nx, dns_nx, ode_steps}
///
/// Unknown sections or keys, duplicates and malformed values are errors.
struct ValidateSettings {
  int control_nt = 1001;
  int control_nx = 1001;
  int dns_nx = 1001;
  int ode_steps = 1000;
};

struct RunConfig {
  std::string problem;
  ProblemOptions options;
  TrainConfig train;  // architecture filled from the problem plus overrides
  std::uint64_t long_epochs = 10000;
  ValidateSettings validate;
};

class ConfigError : public std::runtime_error {
 public:
  /// Message "line N: detail", or "source:N: detail" when the source is known.
  ConfigError(int line, const std::string& detail, const std::string& source = "")
      : std::runtime_error(format(line, detail, source)), line_(line), detail_(detail) {}
  /// 1-based line of the offending entry; 0 when not tied to a line.
  int line() const { return line_; }
  const std::string& detail() const { return detail_; }

 private:
  static std::string format(int line, const std::string& detail, const std::string& source) {
    const std::string at = line > 0 ? std::to_string(line) : "";
    if (source.empty()) return at.empty() ? detail : "line " + at + ": " + detail;
    return source + (at.empty() ? "" : ":" + at) + ": " + detail;
  }

  int line_;
  std::string detail_;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical text form; parse_config(to_text(c)) reproduces c.
std::string to_text(const RunConfig& config);

std::unique_ptr<ControlProblem> make_problem(const RunConfig& config);

}  // namespace cpinn
