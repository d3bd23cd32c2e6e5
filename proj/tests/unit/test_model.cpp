#include <cmath>
#include <random>

#include "doctest.h"
#include "scbf/error.hpp"
#include "scbf/expr.hpp"
#include "scbf/geometry.hpp"
#include "scbf/system.hpp"
#include "specs.hpp"

using namespace scbf;

TEST_CASE("linear dynamics evaluate") {
  const auto spec = load_benchmark("linear-convex");
  std::vector<double> x{0.0, 0.0}, u{0.0, 0.0};
  auto y = spec.f.evaluate(x, u);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 0.0);
  x = {0.4, 0.5};
  u = {1.0, -1.0};
  y = spec.f.evaluate(x, u);
  CHECK(y[0] == doctest::Approx(0.52).epsilon(1e-14));
  CHECK(y[1] == doctest::Approx(0.425).epsilon(1e-14));
}

TEST_CASE("interval evaluation") {
  const auto spec = load_benchmark("linear-convex");
  Box xb{{0.0, 0.1}, {0.0, 0.1}}, ub{{0.0, 0.0}, {0.0, 0.0}};
  auto r = spec.f.interval_eval(xb, ub);
  for (const auto& iv : r) {
    CHECK(iv.lo == doctest::Approx(0.0));
    CHECK(iv.hi == doctest::Approx(0.105));
  }
  const Interval p = Interval{-1.0, 1.0} * Interval{2.0, 3.0};
  CHECK(p.lo == -3.0);
  CHECK(p.hi == 3.0);
}

TEST_CASE("interval evaluation encloses point evaluation") {
  std::mt19937_64 rng(7);
  for (const auto& name : benchmark_names()) {
    const auto spec = load_benchmark(name);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
      Box xb(spec.n), ub(spec.m);
      for (int d = 0; d < spec.n; ++d) {
        const auto& D = spec.domain_box[d];
        double a = D.lo + unit(rng) * D.width(), b = D.lo + unit(rng) * D.width();
        xb[d] = {std::min(a, b), std::max(a, b)};
      }
      for (int d = 0; d < spec.m; ++d) {
        const auto& U = spec.control_box[d];
        double a = U.lo + unit(rng) * U.width(), b = U.lo + unit(rng) * U.width();
        ub[d] = {std::min(a, b), std::max(a, b)};
      }
      const auto enc = spec.f.interval_eval(xb, ub);
      for (int k = 0; k < 20; ++k) {
        std::vector<double> x(spec.n), u(spec.m);
        for (int d = 0; d < spec.n; ++d) x[d] = xb[d].lo + unit(rng) * xb[d].width();
        for (int d = 0; d < spec.m; ++d) u[d] = ub[d].lo + unit(rng) * ub[d].width();
        const auto y = spec.f.evaluate(x, u);
        for (int d = 0; d < spec.n; ++d) {
          REQUIRE(enc[d].lo <= y[d] + 1e-12);
          REQUIRE(y[d] <= enc[d].hi + 1e-12);
        }
      }
    }
  }
}

TEST_CASE("shipped configurations") {
  const auto lc = load_benchmark("linear-convex");
  CHECK(lc.n == 2);
  CHECK(lc.m == 2);
  CHECK(lc.sigma.isApprox(0.01 * Eigen::MatrixXd::Identity(2, 2)));
  CHECK(lc.domain_box[0].lo == -1.0);
  CHECK(lc.domain_box[1].hi == 1.0);
  CHECK(lc.initial_box[0].lo == 0.4);
  CHECK(lc.initial_box[1].hi == 0.5);

  const auto t = load_benchmark("temperature-3room");
  for (int d = 0; d < 3; ++d) {
    CHECK(t.control_box[d].lo == 0.0);
    CHECK(t.control_box[d].hi == 0.5);
    CHECK(t.domain_box[d].lo == 17.0);
    CHECK(t.domain_box[d].hi == 21.0);
  }
}

TEST_CASE("covariance must be positive definite") {
  const std::string doc = R"({"name": "bad", "dimensions": {"state": 2, "control": 1},
    "dynamics": ["x1", "x2 + u1"], "noise": {"covariance": [[1, 0], [0, 0]]},
    "domain": [[-1, 1], [-1, 1]], "initial": [[0, 0.1], [0, 0.1]],
    "obstacles": [], "control": [[-1, 1]], "horizon": 50})";
  try {
    load_spec(doc);
    FAIL("accepted a singular covariance");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidInput);
    CHECK(std::string(e.what()).find("covariance not positive-definite") != std::string::npos);
  }
}

TEST_CASE("horizon parsing") {
  CHECK(parse_horizon("50").steps == 50);
  CHECK(parse_horizon("infinite").infinite);
  CHECK_THROWS_AS(parse_horizon("ten"), Error);
}

TEST_CASE("whitening") {
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(2, 2);
  auto w = whiten(s);
  CHECK((w.t * s * w.t.transpose()).isApprox(Eigen::MatrixXd::Identity(2, 2)));

  s = Eigen::Vector2d(4.0, 9.0).asDiagonal();
  w = whiten(s);
  CHECK(w.diagonal);
  CHECK(std::abs(w.t(0, 0)) == doctest::Approx(0.5));
  CHECK(std::abs(w.t(1, 1)) == doctest::Approx(1.0 / 3.0));

  s = 0.01 * Eigen::MatrixXd::Identity(2, 2);
  w = whiten(s);
  CHECK((w.t.transpose() * w.t).isApprox(100.0 * Eigen::MatrixXd::Identity(2, 2)));

  Eigen::MatrixXd full(2, 2);
  full << 2.0, 0.6, 0.6, 1.0;
  w = whiten(full);
  CHECK((w.t * full * w.t.transpose()).isApprox(Eigen::MatrixXd::Identity(2, 2), 1e-12));
  CHECK((w.t * w.t_inverse).isApprox(Eigen::MatrixXd::Identity(2, 2), 1e-12));
}

TEST_CASE("whitened noise has identity covariance") {
  Eigen::MatrixXd full(2, 2);
  full << 0.02, 0.005, 0.005, 0.01;
  const auto w = whiten(full);
  Eigen::LLT<Eigen::MatrixXd> llt(full);
  const Eigen::MatrixXd l = llt.matrixL();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    Eigen::Vector2d z(g(rng), g(rng));
    Eigen::Vector2d v = w.t * (l * z);
    acc += v * v.transpose();
  }
  acc /= n;
  CHECK(std::abs(acc(0, 0) - 1.0) < 0.05);
  CHECK(std::abs(acc(1, 1) - 1.0) < 0.05);
  CHECK(std::abs(acc(0, 1)) < 0.05);
}

TEST_CASE("partition counts") {
  const auto lc = load_benchmark("linear-convex");
  std::vector<int> g{10, 10};
  CHECK(build_partition(lc, g).size() == 100);

  const auto nc = load_benchmark("linear-nonconvex");
  const auto p = build_partition(nc, g);
  CHECK(p.size() == 99);
  CHECK(p.obstacle_cells.size() == 1);

  std::vector<int> one{1, 1};
  const auto single = build_partition(lc, one);
  REQUIRE(single.size() == 1);
  CHECK(single.regions[0].lo[0] == doctest::Approx(-10.0));
  CHECK(single.regions[0].hi[1] == doctest::Approx(10.0));
}

TEST_CASE("partition tiles the whitened domain") {
  for (const auto& name : benchmark_names()) {
    const auto spec = load_benchmark(name);
    const auto p = build_partition(spec, spec.default_grid);
    double vol = 0.0;
    for (const auto& r : p.regions) vol += box_volume(r.box());
    double cell = 1.0;
    for (double w : p.cell_width) cell *= w;
    vol += cell * static_cast<double>(p.obstacle_cells.size());
    const double total = box_volume(p.whitening.image(spec.domain_box));
    CHECK(std::abs(vol - total) <= 1e-9 * total);
  }
}

TEST_CASE("locate") {
  const auto lc = load_benchmark("linear-convex");
  std::vector<int> g{10, 10};
  const auto p = build_partition(lc, g);
  // Cells are 0.2 wide in original coordinates.
  const auto& r7 = p.regions[7];
  std::vector<double> c{0.05 * (r7.lo[0] + r7.hi[0]), 0.05 * (r7.lo[1] + r7.hi[1])};
  CHECK(p.locate(c) == 7);
  CHECK_FALSE(p.locate(std::vector<double>{1.5, 0.0}).has_value());

  // Shared face between two neighbours goes to the lower index.
  const double face = r7.hi[0] / 10.0;
  std::vector<double> on_face{face, c[1]};
  const auto hit = p.locate(on_face);
  REQUIRE(hit.has_value());
  CHECK(*hit <= 7);
  CHECK(p.regions[*hit].box()[0].contains(face * 10.0));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 100000; ++k) {
    std::vector<double> x{u(rng), u(rng)};
    const auto i = p.locate(x);
    REQUIRE(i.has_value());
    const auto xw = p.whitening.apply(x);
    const auto box = p.regions[*i].box();
    REQUIRE(box[0].contains(xw[0]));
    REQUIRE(box[1].contains(xw[1]));
  }
}

TEST_CASE("obstacle cells are unsafe") {
  const auto nc = load_benchmark("linear-nonconvex");
  const auto p = build_partition(nc, nc.default_grid);
  std::vector<double> x{0.15, 0.15};
  CHECK_FALSE(nc.in_safe_set(x));
  CHECK_FALSE(p.locate(x).has_value());
}
