#include "cpinn/autodiff.hpp"
#include "cpinn/loss.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace cpinn;
using testing::close_rel;

namespace {

double head_value(const NetworkOutputs& o, Head h, int c) {
  switch (h) {
    case Head::y: return o.y(c);
    case Head::u: return o.u(c);
    case Head::lambda: return o.lambda(c);
  }
  return 0.0;
}

const Jet& head_jet(const HeadJets& j, Head h) {
  return h == Head::y ? j.y : h == Head::u ? j.u : j.lambda;
}

/// Compares every requested jet entry at (t, x) with central differences of
/// the plain forward pass.
void check_jets_against_fd(const ControlPinnParams& p, double t, std::vector<double> x) {
  const int d = static_cast<int>(x.size());
  const HeadJets jets = jet_eval(p, t, x, {true, 2});
  const double h1 = 1e-4, h2 = 1e-3;
  for (Head h : {Head::y, Head::u, Head::lambda}) {
    const Jet& j = head_jet(jets, h);
    const auto f = [&](double tt, const std::vector<double>& xx) { return forward(p, tt, xx); };
    for (int c = 0; c < static_cast<int>(j.value.size()); ++c) {
      CHECK(j.value(c) == doctest::Approx(head_value(f(t, x), h, c)).epsilon(1e-14));
      const double fd_t = (head_value(f(t + h1, x), h, c) - head_value(f(t - h1, x), h, c)) / (2 * h1);
      CHECK(close_rel(j.d_dt(c), fd_t, 1e-5, 0.1));
      for (int i = 0; i < d; ++i) {
        auto xp = x, xm = x, xp2 = x, xm2 = x;
        xp[static_cast<std::size_t>(i)] += h1;
        xm[static_cast<std::size_t>(i)] -= h1;
        xp2[static_cast<std::size_t>(i)] += h2;
        xm2[static_cast<std::size_t>(i)] -= h2;
        const double fd_x = (head_value(f(t, xp), h, c) - head_value(f(t, xm), h, c)) / (2 * h1);
        const double fd_xx =
            (head_value(f(t, xp2), h, c) - 2 * head_value(f(t, x), h, c) + head_value(f(t, xm2), h, c)) / (h2 * h2);
        CHECK(close_rel(j.d_dx(c, i), fd_x, 1e-5, 0.1));
        CHECK(close_rel(j.d2_dx2(c, i), fd_xx, 1e-4, 0.1));
      }
    }
  }
}

}  // namespace

TEST_CASE("ELU derivatives are pinned at zero") {
  CHECK(Elu::value(0.0) == 0.0);
  CHECK(Elu::slope(0.0) == 1.0);
  CHECK(Elu::curvature(0.0) == 1.0);
  CHECK(Elu::curvature(1e-300) == 0.0);
  CHECK(Elu::slope(-1.0) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("network jets use ELU''(0) = 1 at a kink") {
  ArchitectureConfig a = testing::small_arch(1, 1, 1, 2);
  a.trunk_layers = 1;
  ControlPinnParams p(a);
  p.weight(0)(0, 1) = 1.0;         // first hidden unit sees x only
  p.weight(p.y_head())(0, 0) = 1.0;  // y = ELU(x)
  const double x[] = {0.0};
  const HeadJets j = jet_eval(p, 0.5, x, {true, 2});
  CHECK(j.y.value(0) == 0.0);
  CHECK(j.y.d_dx(0, 0) == 1.0);
  CHECK(j.y.d2_dx2(0, 0) == 1.0);
  CHECK(j.y.d_dt(0) == 0.0);
}

TEST_CASE("jets match finite differences") {
  SUBCASE("ODE network") {
    const ControlPinnParams p = testing::random_params(testing::small_arch(0, 1, 1), 21);
    for (double t : {0.05, 0.4, 0.93}) check_jets_against_fd(p, t, {});
  }
  SUBCASE("1-D network") {
    const ControlPinnParams p = testing::random_params(testing::small_arch(1, 1, 1), 22);
    check_jets_against_fd(p, 0.3, {0.71});
    check_jets_against_fd(p, 0.8, {0.12});
  }
  SUBCASE("2-D network with two states") {
    const ControlPinnParams p = testing::random_params(testing::small_arch(2, 2, 1), 23);
    check_jets_against_fd(p, 0.6, {0.25, 0.55});
  }
}

TEST_CASE("identity activation gives an affine network") {
  ArchitectureConfig a = testing::small_arch(1, 1, 1);
  a.activation = Activation::identity;
  const ControlPinnParams p = testing::random_params(a, 5);
  const double x1[] = {0.2}, x2[] = {0.9};
  const HeadJets j1 = jet_eval(p, 0.1, x1, {true, 2});
  const HeadJets j2 = jet_eval(p, 0.7, x2, {true, 2});
  for (const auto* pair : {&j1, &j2}) {
    CHECK(pair->y.d2_dx2(0, 0) == 0.0);
    CHECK(pair->u.d2_dx2(0, 0) == 0.0);
    CHECK(pair->lambda.d2_dx2(0, 0) == 0.0);
  }
  CHECK(j1.y.d_dt(0) == j2.y.d_dt(0));
  CHECK(j1.lambda.d_dx(0, 0) == j2.lambda.d_dx(0, 0));
  // value is affine: midpoint value is the mean
  const double xm[] = {0.55};
  const HeadJets jm = jet_eval(p, 0.4, xm, {});
  CHECK(jm.u.value(0) == doctest::Approx(0.5 * (j1.u.value(0) + j2.u.value(0))).epsilon(1e-13));
}

TEST_CASE("batched jets equal single-point jets") {
  const ControlPinnParams p = testing::random_params(testing::small_arch(2, 2, 1), 31);
  Eigen::MatrixXd pts(3, 5);
  pts << 0.1, 0.2, 0.5, 0.7, 0.95, 0.3, 0.8, 0.1, 0.45, 0.6, 0.9, 0.05, 0.5, 0.33, 0.2;
  const JetLayout layout(2, {true, 2});
  const JetBatch batch = forward_jets(p, pts, layout);
  for (Eigen::Index k = 0; k < pts.cols(); ++k) {
    const double x[] = {pts(1, k), pts(2, k)};
    const HeadJets single = jet_eval(p, pts(0, k), x, {true, 2});
    const Jet b = batch.jet(Head::y, k);
    CHECK((b.value - single.y.value).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((b.d_dt - single.y.d_dt).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((b.d2_dx2 - single.y.d2_dx2).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("layout channel numbering") {
  const JetLayout full(2, {true, 2});
  CHECK(full.channels() == 6);
  CHECK(full.dt() == 1);
  CHECK(full.dx(1) == 3);
  CHECK(full.dxx(0) == 4);
  const JetLayout values(3, {});
  CHECK(values.channels() == 1);
  CHECK(values.dt() == -1);
  CHECK(values.dx(0) == -1);
  const JetLayout ode(0, {true, 2});
  CHECK(ode.channels() == 2);
  CHECK_FALSE(ode.has_second_order());
  CHECK_THROWS_AS(JetLayout(1, {false, 3}), std::invalid_argument);
}

TEST_CASE("non-finite activations raise an evaluation error") {
  ControlPinnParams p = testing::random_params(testing::small_arch(1, 1, 1), 2);
  p.weight(0)(0, 0) = std::nan("");
  const double x[] = {0.5};
  CHECK_THROWS_AS(jet_eval(p, 0.5, x, {}), EvaluationError);
  try {
    jet_eval(p, 0.5, x, {});
  } catch (const EvaluationError& e) {
    CHECK(e.layer() == 0);
  }
}

TEST_CASE("loss_gradient of a linear functional of the outputs") {
  const ControlPinnParams p = testing::random_params(testing::small_arch(1, 1, 1), 41);
  Eigen::MatrixXd pts(2, 3);
  pts << 0.1, 0.5, 0.9, 0.2, 0.4, 0.8;
  const PointBatch batch{pts, JetLayout(1, {true, 2})};
  // L = sum_j (y_j + 2 u_xx,j - lambda_t,j)
  const LossEvaluator eval = [](const ControlPinnParams&, std::span<const JetBatch> jets, std::span<JetSeeds> seeds,
                                Eigen::Ref<Eigen::VectorXd>) {
    const JetBatch& b = jets[0];
    double sum = 0.0;
    for (Eigen::Index j = 0; j < b.points; ++j) {
      sum += b.entry(Head::y, 0, 0, j) + 2 * b.entry(Head::u, 0, b.layout.dxx(0), j) -
             b.entry(Head::lambda, 0, b.layout.dt(), j);
      if (!seeds.empty()) {
        seeds[0].entry(Head::y, 0, 0, j, b.points) += 1.0;
        seeds[0].entry(Head::u, 0, b.layout.dxx(0), j, b.points) += 2.0;
        seeds[0].entry(Head::lambda, 0, b.layout.dt(), j, b.points) -= 1.0;
      }
    }
    return sum;
  };
  const PointBatch batches[] = {batch};
  const LossGradient g = loss_gradient(p, batches, eval);
  auto value = [&](const ControlPinnParams& q) {
    const JetBatch jb = forward_jets(q, pts, batch.layout);
    Eigen::VectorXd direct = Eigen::VectorXd::Zero(q.values().size());
    return eval(q, std::span<const JetBatch>(&jb, 1), std::span<JetSeeds>(), direct);
  };
  CHECK(g.loss == doctest::Approx(value(p)).epsilon(1e-14));
  CounterRng rng(3, 0, 0);
  for (int k = 0; k < 5; ++k) {
    const Eigen::VectorXd dir = testing::random_unit(g.gradient.size(), rng);
    ControlPinnParams a = p, b = p;
    a.values() += 1e-4 * dir;
    b.values() -= 1e-4 * dir;
    const double fd = (value(a) - value(b)) / 2e-4;
    CHECK(close_rel(g.gradient.dot(dir), fd, 1e-4, 1e-3));
  }
}

TEST_CASE("loss_gradient rejects a non-finite loss") {
  const ControlPinnParams p = testing::random_params(testing::small_arch(0, 1, 1), 1);
  Eigen::MatrixXd pts(1, 1);
  pts << 0.5;
  const PointBatch batches[] = {{pts, JetLayout(0, {})}};
  const LossEvaluator eval = [](const ControlPinnParams&, std::span<const JetBatch>, std::span<JetSeeds>,
                                Eigen::Ref<Eigen::VectorXd>) { return std::nan(""); };
  CHECK_THROWS_AS(loss_gradient(p, batches, eval), std::domain_error);
}

TEST_CASE("full loss gradient matches central differences on 10 directions") {
  for (const char* id : {"analytical", "heat", "predator_prey"}) {
    CAPTURE(id);
    const auto problem = make_problem(id);
    const ArchitectureConfig arch =
        testing::small_arch(problem->domain().spatial_dim(), problem->state_dim(), problem->control_dim());
    const ControlPinnParams p = testing::random_params(arch, 77, 0.5);
    SamplerState st{5, 0};
    const CollocationBatch batch = sample(problem->domain(), {8, 8, 8, 8}, st);
    const LossWeights w;
    const LossWithGradient lg = evaluate_with_gradient(p, *problem, batch, w);
    CHECK(lg.breakdown.total == evaluate(p, *problem, batch, w).total);
    CounterRng rng(12, 0, 0);
    for (int k = 0; k < 10; ++k) {
      const Eigen::VectorXd dir = testing::random_unit(lg.gradient.size(), rng);
      ControlPinnParams a = p, b = p;
      a.values() += 1e-4 * dir;
      b.values() -= 1e-4 * dir;
      const double fd = (evaluate(a, *problem, batch, w).total - evaluate(b, *problem, batch, w).total) / 2e-4;
      CHECK(close_rel(lg.gradient.dot(dir), fd, 1e-4, 1e-6));
    }
  }
}
