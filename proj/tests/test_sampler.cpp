#include "cpinn/sampler.hpp"

#include <doctest.h>

#include <array>

using namespace cpinn;

namespace {

const Domain square{0.0, 1.0, {0.0}, {1.0}};
const Domain cube{0.0, 1.0, {0.0, 0.0}, {1.0, 1.0}};

bool on_boundary(const Eigen::MatrixXd& pts, Eigen::Index j, const Domain& d) {
  for (int i = 0; i < d.spatial_dim(); ++i) {
    const double x = pts(1 + i, j);
    if (x == d.lower[static_cast<std::size_t>(i)] || x == d.upper[static_cast<std::size_t>(i)]) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("counts and manifolds") {
  SamplerState st{3, 0};
  const SampleSizes sizes{500, 40, 30, 60};
  const CollocationBatch b = sample(cube, sizes, st);
  CHECK(st.epoch == 1);
  CHECK(b.epoch == 0);
  CHECK(b.interior.rows() == 3);
  CHECK(b.interior.cols() == 500);
  CHECK(b.initial.cols() == 40);
  CHECK(b.terminal.cols() == 30);
  CHECK(b.boundary.cols() == 60);
  CHECK((b.initial.row(0).array() == 0.0).all());
  CHECK((b.terminal.row(0).array() == 1.0).all());
  CHECK(b.interior.minCoeff() >= 0.0);
  CHECK(b.interior.maxCoeff() <= 1.0);
  for (Eigen::Index j = 0; j < b.boundary.cols(); ++j) CHECK(on_boundary(b.boundary, j, cube));
}

TEST_CASE("analytical domain") {
  SamplerState st{1, 0};
  const CollocationBatch b = sample(Domain{0.0, 1.0, {}, {}}, {}, st);
  CHECK(b.interior.rows() == 1);
  CHECK(b.interior.cols() == 1000);
  REQUIRE(b.initial.cols() == 1);
  CHECK(b.initial(0, 0) == 0.0);
  REQUIRE(b.terminal.cols() == 1);
  CHECK(b.terminal(0, 0) == 1.0);
  CHECK(b.boundary.cols() == 0);
}

TEST_CASE("deterministic per seed and epoch") {
  SamplerState a{7, 0}, b{7, 0};
  const CollocationBatch a0 = sample(square, {}, a);
  const CollocationBatch b0 = sample(square, {}, b);
  CHECK(a0.interior == b0.interior);
  CHECK(a0.boundary == b0.boundary);
  const CollocationBatch a1 = sample(square, {}, a);
  CHECK(a1.interior != a0.interior);
  CHECK(a1.initial != a0.initial);

  SamplerState jump{7, 1};
  CHECK(sample(square, {}, jump).interior == a1.interior);
  SamplerState other{8, 0};
  CHECK(sample(square, {}, other).interior != a0.interior);
}

TEST_CASE("interior mean") {
  SamplerState st{11, 0};
  const CollocationBatch b = sample(square, {100000, 1, 1, 1}, st);
  CHECK(b.interior.row(0).mean() == doctest::Approx(0.5).epsilon(0.02));
  CHECK(std::abs(b.interior.row(0).mean() - 0.5) < 0.01);
  CHECK(std::abs(b.interior.row(1).mean() - 0.5) < 0.01);
}

TEST_CASE("coverage of a 10 x 10 partition over 100 epochs") {
  std::array<int, 100> hits{};
  SamplerState st{5, 0};
  for (int e = 0; e < 100; ++e) {
    const CollocationBatch b = sample(square, {1000, 1, 1, 1}, st);
    for (Eigen::Index j = 0; j < b.interior.cols(); ++j) {
      const int i = std::min(9, static_cast<int>(b.interior(0, j) * 10));
      const int k = std::min(9, static_cast<int>(b.interior(1, j) * 10));
      ++hits[static_cast<std::size_t>(i * 10 + k)];
    }
  }
  for (int h : hits) CHECK(h >= 1);
}

TEST_CASE("boundary faces are hit in proportion to their measure") {
  const Domain wide{0.0, 1.0, {0.0, 0.0}, {3.0, 1.0}};
  SamplerState st{2, 0};
  const CollocationBatch b = sample(wide, {1, 1, 1, 40000}, st);
  int long_faces = 0;
  for (Eigen::Index j = 0; j < b.boundary.cols(); ++j) {
    if (b.boundary(2, j) == 0.0 || b.boundary(2, j) == 1.0) ++long_faces;
  }
  // x2 faces have length 3 each, x1 faces length 1: share 6/8
  CHECK(long_faces / 40000.0 == doctest::Approx(0.75).epsilon(0.02));
}

TEST_CASE("column_point") {
  Eigen::MatrixXd pts(3, 2);
  pts << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
  const Point p = column_point(pts, 1);
  CHECK(p.t == 0.2);
  CHECK(p.x[0] == 0.4);
  CHECK(p.x[1] == 0.6);
}
