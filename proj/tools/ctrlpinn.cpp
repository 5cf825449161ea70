// ctrlpinn: train, validate, plot and export Control PINN runs.
//
//   ctrlpinn train heat.cfg --long --out runs/heat
//   ctrlpinn validate runs/heat
//   ctrlpinn validate --control u.csv --diffusivity 1
//   ctrlpinn plot runs/heat
//   ctrlpinn export runs/heat --nt 1001 --nx 1001

#include "cpinn/app.hpp"

#include <CLI11.hpp>

#include <exception>
#include <iostream>

int main(int argc, char** argv) {
  using namespace cpinn;
  app::configure_process();

  CLI::App cli{"Control PINN: physics-informed networks for optimal control"};
  cli.require_subcommand(1);

  app::TrainOptions train;
  std::string config_positional, config_flag;
  std::uint64_t seed = 0, epochs = 0;
  std::string out;
  double diffusivity = 0.0;
  auto* t = cli.add_subcommand("train", "train a network from a run config");
  t->add_option("config_file", config_positional, "run config file");
  t->add_option("--config", config_flag, "run config file");
  auto* seed_opt = t->add_option("--seed", seed, "master seed");
  auto* epochs_opt = t->add_option("--epochs", epochs, "number of epochs");
  auto* out_opt = t->add_option("--out", out, "run directory");
  auto* diff_opt = t->add_option("--diffusivity", diffusivity, "heat diffusivity (alpha^2)");
  t->add_flag("--long", train.long_mode, "use the config's long_epochs (10000 by default)");

  app::ValidateOptions validate;
  std::string run_dir, control, vout;
  double vdiff = 0.0;
  auto* v = cli.add_subcommand("validate", "check a run against classical solvers");
  v->add_option("run", run_dir, "run directory");
  auto* control_opt = v->add_option("--control", control, "heat control CSV to validate instead of a run");
  auto* vdiff_opt = v->add_option("--diffusivity", vdiff, "heat diffusivity for the DNS");
  auto* vout_opt = v->add_option("--out", vout, "output directory");

  std::string plot_dir;
  auto* p = cli.add_subcommand("plot", "render SVG plots of a run");
  p->add_option("run", plot_dir, "run directory")->required();

  app::ExportOptions exp;
  std::string export_dir, eout;
  int nt = 0, nx = 0;
  auto* e = cli.add_subcommand("export", "write learned fields as grid CSVs");
  e->add_option("run", export_dir, "run directory")->required();
  auto* nt_opt = e->add_option("--nt", nt, "time nodes");
  auto* nx_opt = e->add_option("--nx", nx, "space nodes");
  auto* eout_opt = e->add_option("--out", eout, "output directory");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = cli.exit(err);
    return code == 0 ? 0 : app::kConfigError;
  }

  try {
    if (*t) {
      if (config_positional.empty() == config_flag.empty()) {
        std::cerr << "error: give the config either as an argument or with --config\n";
        return app::kConfigError;
      }
      train.config = config_positional.empty() ? config_flag : config_positional;
      if (*seed_opt) train.seed = seed;
      if (*epochs_opt) train.epochs = epochs;
      if (*out_opt) train.out = out;
      if (*diff_opt) train.diffusivity = diffusivity;
      return app::train(train, std::cout);
    }
    if (*v) {
      if (!run_dir.empty()) validate.run_dir = run_dir;
      if (*control_opt) validate.control = control;
      if (*vdiff_opt) validate.diffusivity = vdiff;
      if (*vout_opt) validate.out = vout;
      return app::validate(validate, std::cout);
    }
    if (*p) return app::plot(plot_dir, std::cout);
    if (*e) {
      exp.run_dir = export_dir;
      if (*nt_opt) exp.nt = nt;
      if (*nx_opt) exp.nx = nx;
      if (*eout_opt) exp.out = eout;
      return app::export_fields(exp, std::cout);
    }
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return app::kConfigError;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return app::kFailure;
  }
  return app::kFailure;
}
