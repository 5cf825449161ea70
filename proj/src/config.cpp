#include "cpinn/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace cpinn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v, int line) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(line, "expected a number, got '" + v + "'");
  }
  return out;
}

std::int64_t to_int(const std::string& v, int line) {
  std::int64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(line, "expected an integer, got '" + v + "'");
  return out;
}

int to_count(const std::string& v, int line, std::int64_t min) {
  const auto n = to_int(v, line);
  if (n < min || n > 100000000) throw ConfigError(line, "value " + v + " out of range (min " + std::to_string(min) + ")");
  return static_cast<int>(n);
}

bool to_bool(const std::string& v, int line) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(line, "expected true or false, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

using Setter = std::function<void(RunConfig&, const std::string&, int)>;

struct Arch {
  int width = 100;
  int trunk = 5;
  int control = 3;
  int adjoint = 2;
  Activation activation = Activation::elu;
};

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> m;
    m["problem"] = [](RunConfig& c, const std::string& v, int line) {
      if (v != "analytical" && v != "heat" && v != "predator_prey") {
        throw ConfigError(line, "unknown problem '" + v + "' (analytical, heat, predator_prey)");
      }
      c.problem = v;
    };
    m["epochs"] = [](RunConfig& c, const std::string& v, int line) { c.train.epochs = to_count(v, line, 0); };
    m["long_epochs"] = [](RunConfig& c, const std::string& v, int line) { c.long_epochs = to_count(v, line, 0); };
    m["seed"] = [](RunConfig& c, const std::string& v, int line) {
      const auto s = to_int(v, line);
      if (s < 0) throw ConfigError(line, "seed must be >= 0");
      c.train.seed = static_cast<std::uint64_t>(s);
    };
    m["out"] = [](RunConfig& c, const std::string& v, int) { c.train.output_dir = v; };

    m["architecture.width"] = [](RunConfig& c, const std::string& v, int line) {
      c.train.architecture.width = to_count(v, line, 1);
    };
    m["architecture.trunk_layers"] = [](RunConfig& c, const std::string& v, int line) {
      c.train.architecture.trunk_layers = to_count(v, line, 1);
    };
    m["architecture.control_layers"] = [](RunConfig& c, const std::string& v, int line) {
      c.train.architecture.control_layers = to_count(v, line, 1);
    };
    m["architecture.adjoint_layers"] = [](RunConfig& c, const std::string& v, int line) {
      c.train.architecture.adjoint_layers = to_count(v, line, 1);
    };
    m["architecture.activation"] = [](RunConfig& c, const std::string& v, int line) {
      if (v == "elu") {
        c.train.architecture.activation = Activation::elu;
      } else if (v == "identity") {
        c.train.architecture.activation = Activation::identity;
      } else {
        throw ConfigError(line, "unknown activation '" + v + "' (elu, identity)");
      }
    };

    m["sampler.interior"] = [](RunConfig& c, const std::string& v, int line) { c.train.sizes.interior = to_count(v, line, 1); };
    m["sampler.initial"] = [](RunConfig& c, const std::string& v, int line) { c.train.sizes.initial = to_count(v, line, 1); };
    m["sampler.terminal"] = [](RunConfig& c, const std::string& v, int line) { c.train.sizes.terminal = to_count(v, line, 1); };
    m["sampler.boundary"] = [](RunConfig& c, const std::string& v, int line) { c.train.sizes.boundary = to_count(v, line, 1); };

    const std::pair<const char*, double LossWeights::*> weights[] = {
        {"data", &LossWeights::data},
        {"forward", &LossWeights::forward},
        {"adjoint", &LossWeights::adjoint},
        {"optimality", &LossWeights::optimality},
        {"initial", &LossWeights::initial},
        {"terminal_adjoint", &LossWeights::terminal_adjoint},
        {"boundary", &LossWeights::boundary}};
    for (const auto& [name, member] : weights) {
      m[std::string("loss.") + name] = [member](RunConfig& c, const std::string& v, int line) {
        const double w = to_double(v, line);
        if (w < 0.0) throw ConfigError(line, "loss weights must be >= 0");
        c.train.weights.*member = w;
      };
    }

    m["optimizer.learning_rate"] = [](RunConfig& c, const std::string& v, int line) {
      c.train.adam.learning_rate = to_double(v, line);
      if (!(c.train.adam.learning_rate > 0.0)) throw ConfigError(line, "learning_rate must be > 0");
    };
    m["optimizer.beta1"] = [](RunConfig& c, const std::string& v, int line) {
      c.train.adam.beta1 = to_double(v, line);
      if (!(c.train.adam.beta1 >= 0.0 && c.train.adam.beta1 < 1.0)) throw ConfigError(line, "beta1 must be in [0, 1)");
    };
    m["optimizer.beta2"] = [](RunConfig& c, const std::string& v, int line) {
      c.train.adam.beta2 = to_double(v, line);
      if (!(c.train.adam.beta2 >= 0.0 && c.train.adam.beta2 < 1.0)) throw ConfigError(line, "beta2 must be in [0, 1)");
    };
    m["optimizer.epsilon"] = [](RunConfig& c, const std::string& v, int line) {
      c.train.adam.epsilon = to_double(v, line);
      if (!(c.train.adam.epsilon > 0.0)) throw ConfigError(line, "epsilon must be > 0");
    };

    m["probe.nt"] = [](RunConfig& c, const std::string& v, int line) {
      if (!c.train.probe) c.train.probe = ProbeGrid{};
      c.train.probe->nt = to_count(v, line, 2);
    };
    m["probe.nx"] = [](RunConfig& c, const std::string& v, int line) {
      if (!c.train.probe) c.train.probe = ProbeGrid{};
      c.train.probe->nx = to_count(v, line, 1);
    };
    m["probe.every"] = [](RunConfig& c, const std::string& v, int line) { c.train.probe_every = to_count(v, line, 1); };

    m["run.checkpoint_every"] = [](RunConfig& c, const std::string& v, int line) {
      c.train.checkpoint_every = to_count(v, line, 0);
    };
    m["run.divergence_threshold"] = [](RunConfig& c, const std::string& v, int line) {
      c.train.divergence_threshold = to_double(v, line);
      if (!(c.train.divergence_threshold > 0.0)) throw ConfigError(line, "divergence_threshold must be > 0");
    };
    m["run.early_stop_tolerance"] = [](RunConfig& c, const std::string& v, int line) {
      c.train.early_stop_tolerance = to_double(v, line);
    };

    m["heat.diffusivity"] = [](RunConfig& c, const std::string& v, int line) {
      c.options.heat.diffusivity = to_double(v, line);
      if (!(c.options.heat.diffusivity > 0.0)) throw ConfigError(line, "diffusivity must be > 0");
    };
    m["heat.initial_tracking_weight"] = [](RunConfig& c, const std::string& v, int line) {
      c.options.heat.initial_tracking_weight = to_double(v, line);
    };
    m["heat.terminal_tracking_weight"] = [](RunConfig& c, const std::string& v, int line) {
      c.options.heat.terminal_tracking_weight = to_double(v, line);
    };
    m["heat.control_weight"] = [](RunConfig& c, const std::string& v, int line) {
      c.options.heat.control_weight = to_double(v, line);
    };
    m["predator_prey.tracking_weight"] = [](RunConfig& c, const std::string& v, int line) {
      c.options.predator_prey.tracking_weight = to_double(v, line);
    };
    m["predator_prey.control_weight"] = [](RunConfig& c, const std::string& v, int line) {
      c.options.predator_prey.control_weight = to_double(v, line);
    };
    m["predator_prey.track_predator"] = [](RunConfig& c, const std::string& v, int line) {
      c.options.predator_prey.track_predator = to_bool(v, line);
    };

    m["validate.control_nt"] = [](RunConfig& c, const std::string& v, int line) { c.validate.control_nt = to_count(v, line, 2); };
    m["validate.control_nx"] = [](RunConfig& c, const std::string& v, int line) { c.validate.control_nx = to_count(v, line, 2); };
    m["validate.dns_nx"] = [](RunConfig& c, const std::string& v, int line) { c.validate.dns_nx = to_count(v, line, 3); };
    m["validate.ode_steps"] = [](RunConfig& c, const std::string& v, int line) { c.validate.ode_steps = to_count(v, line, 1); };
    return m;
  }();
  return table;
}

const std::set<std::string> kSections = {"", "architecture", "sampler", "loss", "optimizer", "probe",
                                         "run", "heat", "predator_prey", "validate"};

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  // architecture overrides are collected first and applied on top of the
  // problem's widths at the end
  c.train.architecture = ArchitectureConfig{};
  std::string section;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(line, "malformed section header '" + s + "'");
      section = trim(s.substr(1, s.size() - 2));
      if (!kSections.count(section) || section.empty()) throw ConfigError(line, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError(line, "empty key");
    if (value.empty()) throw ConfigError(line, "empty value for '" + key + "'");
    const std::string full = section.empty() ? key : section + "." + key;
    const auto it = setters().find(full);
    if (it == setters().end()) throw ConfigError(line, "unknown key '" + full + "'");
    if (!seen.insert(full).second) throw ConfigError(line, "duplicate key '" + full + "'");
    it->second(c, value, line);
  }
  if (c.problem.empty()) throw ConfigError(0, "missing required key 'problem'");

  const auto problem = make_problem(c.problem, c.options);
  ArchitectureConfig arch = problem->architecture();
  arch.width = c.train.architecture.width;
  arch.trunk_layers = c.train.architecture.trunk_layers;
  arch.control_layers = c.train.architecture.control_layers;
  arch.adjoint_layers = c.train.architecture.adjoint_layers;
  arch.activation = c.train.architecture.activation;
  c.train.architecture = arch;
  if (c.train.output_dir.empty()) c.train.output_dir = std::filesystem::path("runs") / c.problem;
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(e.line(), e.detail(), path.string());
  }
}

std::string to_text(const RunConfig& c) {
  std::ostringstream o;
  const auto& t = c.train;
  o << "problem = " << c.problem << "\n";
  o << "epochs = " << t.epochs << "\n";
  o << "long_epochs = " << c.long_epochs << "\n";
  o << "seed = " << t.seed << "\n";
  o << "out = " << t.output_dir.string() << "\n";
  o << "\n[architecture]\n";
  o << "width = " << t.architecture.width << "\n";
  o << "trunk_layers = " << t.architecture.trunk_layers << "\n";
  o << "control_layers = " << t.architecture.control_layers << "\n";
  o << "adjoint_layers = " << t.architecture.adjoint_layers << "\n";
  o << "activation = " << to_string(t.architecture.activation) << "\n";
  o << "\n[sampler]\n";
  o << "interior = " << t.sizes.interior << "\n";
  o << "initial = " << t.sizes.initial << "\n";
  o << "terminal = " << t.sizes.terminal << "\n";
  o << "boundary = " << t.sizes.boundary << "\n";
  o << "\n[loss]\n";
  const auto names = LossBreakdown::kTermNames;
  const double values[] = {t.weights.data,    t.weights.forward,          t.weights.adjoint, t.weights.optimality,
                           t.weights.initial, t.weights.terminal_adjoint, t.weights.boundary};
  for (std::size_t i = 0; i < names.size(); ++i) o << names[i] << " = " << fmt(values[i]) << "\n";
  o << "\n[optimizer]\n";
  o << "learning_rate = " << fmt(t.adam.learning_rate) << "\n";
  o << "beta1 = " << fmt(t.adam.beta1) << "\n";
  o << "beta2 = " << fmt(t.adam.beta2) << "\n";
  o << "epsilon = " << fmt(t.adam.epsilon) << "\n";
  o << "\n[probe]\n";
  if (t.probe) {
    o << "nt = " << t.probe->nt << "\n";
    o << "nx = " << t.probe->nx << "\n";
  }
  o << "every = " << t.probe_every << "\n";
  o << "\n[run]\n";
  o << "checkpoint_every = " << t.checkpoint_every << "\n";
  o << "divergence_threshold = " << fmt(t.divergence_threshold) << "\n";
  if (t.early_stop_tolerance) o << "early_stop_tolerance = " << fmt(*t.early_stop_tolerance) << "\n";
  o << "\n[heat]\n";
  o << "diffusivity = " << fmt(c.options.heat.diffusivity) << "\n";
  o << "initial_tracking_weight = " << fmt(c.options.heat.initial_tracking_weight) << "\n";
  o << "terminal_tracking_weight = " << fmt(c.options.heat.terminal_tracking_weight) << "\n";
  o << "control_weight = " << fmt(c.options.heat.control_weight) << "\n";
  o << "\n[predator_prey]\n";
  o << "tracking_weight = " << fmt(c.options.predator_prey.tracking_weight) << "\n";
  o << "control_weight = " << fmt(c.options.predator_prey.control_weight) << "\n";
  o << "track_predator = " << (c.options.predator_prey.track_predator ? "true" : "false") << "\n";
  o << "\n[validate]\n";
  o << "control_nt = " << c.validate.control_nt << "\n";
  o << "control_nx = " << c.validate.control_nx << "\n";
  o << "dns_nx = " << c.validate.dns_nx << "\n";
  o << "ode_steps = " << c.validate.ode_steps << "\n";
  return o.str();
}

std::unique_ptr<ControlProblem> make_problem(const RunConfig& config) {
  return make_problem(config.problem, config.options);
}

}  // namespace cpinn
