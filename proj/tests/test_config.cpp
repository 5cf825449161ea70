#include "cpinn/config.hpp"

#include <doctest.h>

#include <string>

using namespace cpinn;

namespace {

int error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST_CASE("minimal config takes the defaults") {
  const RunConfig c = parse_config("problem = heat\n");
  CHECK(c.problem == "heat");
  CHECK(c.train.epochs == 300);
  CHECK(c.train.seed == 1);
  CHECK(c.long_epochs == 10000);
  CHECK(c.options.heat.diffusivity == 0.1);
  CHECK(c.train.architecture == HeatProblem{}.architecture());
  CHECK(c.train.adam.learning_rate == 1e-3);
  CHECK(c.train.output_dir == "runs/heat");
  CHECK(c.validate.control_nx == 1001);
}

TEST_CASE("sections, comments and overrides") {
  const RunConfig c = parse_config(
      "# comment\n"
      "problem = predator_prey   # trailing\n"
      "epochs = 12\n"
      "seed = 9\n"
      "\n"
      "[architecture]\n"
      "width = 16\n"
      "trunk_layers = 2\n"
      "activation = identity\n"
      "[sampler]\n"
      "interior = 64\n"
      "[loss]\n"
      "forward = 0.5\n"
      "[optimizer]\n"
      "learning_rate = 2e-3\n"
      "[probe]\n"
      "nt = 5\n"
      "nx = 7\n"
      "every = 3\n"
      "[run]\n"
      "early_stop_tolerance = 1e-6\n"
      "[predator_prey]\n"
      "track_predator = true\n");
  CHECK(c.train.epochs == 12);
  CHECK(c.train.seed == 9);
  CHECK(c.train.architecture.width == 16);
  CHECK(c.train.architecture.trunk_layers == 2);
  CHECK(c.train.architecture.n_y == 2);
  CHECK(c.train.architecture.spatial_dim == 2);
  CHECK(c.train.architecture.activation == Activation::identity);
  CHECK(c.train.sizes.interior == 64);
  CHECK(c.train.sizes.boundary == 200);
  CHECK(c.train.weights.forward == 0.5);
  CHECK(c.train.weights.adjoint == 0.1);
  CHECK(c.train.adam.learning_rate == 2e-3);
  REQUIRE(c.train.probe.has_value());
  CHECK(c.train.probe->nx == 7);
  CHECK(c.train.probe_every == 3);
  CHECK(c.train.early_stop_tolerance == 1e-6);
  CHECK(c.options.predator_prey.track_predator);
}

TEST_CASE("errors carry line numbers") {
  CHECK(error_line("problem = heat\nepochs = ten\n") == 2);
  CHECK(error_line("problem = heat\n[nonsense]\n") == 2);
  CHECK(error_line("problem = heat\n[heat]\nspeed = 3\n") == 3);
  CHECK(error_line("problem = heat\nseed = 1\nseed = 2\n") == 3);
  CHECK(error_line("problem = wave\n") == 1);
  CHECK(error_line("problem = heat\n[loss]\ndata = -1\n") == 3);
  CHECK(error_line("problem = heat\njust words\n") == 2);
  CHECK(error_line("problem = heat\n[heat\n") == 2);
  CHECK(error_line("problem = heat\n[heat]\ndiffusivity = 0\n") == 3);
  CHECK(error_line("epochs = 5\n") == 0);
  try {
    parse_config("problem = heat\nepochs = ten\n");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("line 2: ", 0) == 0);
  }
}

TEST_CASE("canonical text round trip") {
  RunConfig c = parse_config("problem = heat\nepochs = 7\n[heat]\ndiffusivity = 1\n[run]\ncheckpoint_every = 2\n");
  c.train.adam.learning_rate = 0.1 + 0.2;
  const RunConfig r = parse_config(to_text(c));
  CHECK(to_text(r) == to_text(c));
  CHECK(r.train.adam.learning_rate == c.train.adam.learning_rate);
  CHECK(r.options.heat.diffusivity == 1.0);
  CHECK(r.train.checkpoint_every == 2);
  CHECK(r.train.architecture == c.train.architecture);
}

TEST_CASE("shipped configs parse") {
  const std::string dir = std::string(CTRLPINN_SOURCE_DIR) + "/configs/";
  const RunConfig a = load_config(dir + "analytical.cfg");
  CHECK(a.problem == "analytical");
  CHECK(a.train.epochs == 300);
  const RunConfig h = load_config(dir + "heat.cfg");
  CHECK(h.problem == "heat");
  CHECK(h.long_epochs == 10000);
  CHECK(h.train.epochs == 1500);
  const RunConfig p = load_config(dir + "predator_prey.cfg");
  CHECK(p.train.epochs == 2000);
  REQUIRE(p.train.probe.has_value());
  CHECK(p.train.probe->nt == 11);
  CHECK(p.train.probe->nx == 51);
  CHECK(make_problem(p)->id() == "predator_prey");
  CHECK_THROWS_AS(load_config(dir + "missing.cfg"), ConfigError);
}
