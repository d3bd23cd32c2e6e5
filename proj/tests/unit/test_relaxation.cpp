#include <cmath>
#include <random>

#include "doctest.h"
#include "scbf/controller.hpp"
#include "scbf/kernel.hpp"
#include "scbf/relaxation.hpp"
#include "specs.hpp"

using namespace scbf;

namespace {

struct Sampler {
  std::mt19937_64 rng;
  std::uniform_real_distribution<double> unit{0.0, 1.0};

  explicit Sampler(std::uint64_t seed) : rng(seed) {}

  double in(const Interval& iv) { return iv.lo + unit(rng) * iv.width(); }
};

}  // namespace

TEST_CASE("window relaxation is sound and exact on a point") {
  const ScalarRelaxation pt = relax_window(Interval{0.3, 0.3}, -1.0, 1.0);
  CHECK(pt.lower_at(0.3) == doctest::Approx(erf_window(0.3, -1.0, 1.0)).epsilon(1e-12));
  CHECK(pt.upper_at(0.3) == doctest::Approx(erf_window(0.3, -1.0, 1.0)).epsilon(1e-12));

  const ScalarRelaxation far = relax_window(Interval{40.0, 41.0}, -1.0, 1.0);
  CHECK(far.upper_at(40.0) <= 1e-8);
  CHECK(far.upper_at(41.0) <= 1e-8);
  CHECK(far.lower_at(40.0) <= 0.0 + 1e-300);

  Sampler s(21);
  for (int k = 0; k < 3000; ++k) {
    const double a = -6.0 + 12.0 * s.unit(s.rng), w = 4.0 * s.unit(s.rng);
    const double lo = -3.0 + 6.0 * s.unit(s.rng), hi = lo + 3.0 * s.unit(s.rng);
    const Interval y{a, a + w};
    const ScalarRelaxation r = relax_window(y, lo, hi);
    for (int t = 0; t < 20; ++t) {
      const double yy = s.in(y);
      const double v = erf_window(yy, lo, hi);
      REQUIRE(r.lower_at(yy) <= v + 1e-12);
      REQUIRE(v <= r.upper_at(yy) + 1e-12);
      REQUIRE(r.range.lo <= v + 1e-12);
      REQUIRE(v <= r.range.hi + 1e-12);
    }
  }
}

TEST_CASE("trig relaxations are sound") {
  Sampler s(4);
  for (int k = 0; k < 2000; ++k) {
    const double a = -8.0 + 16.0 * s.unit(s.rng);
    const Interval t{a, a + 5.0 * s.unit(s.rng)};
    const ScalarRelaxation rs = relax_sin(t), rc = relax_cos(t);
    for (int q = 0; q < 20; ++q) {
      const double x = s.in(t);
      REQUIRE(rs.lower_at(x) <= std::sin(x) + 1e-12);
      REQUIRE(std::sin(x) <= rs.upper_at(x) + 1e-12);
      REQUIRE(rc.lower_at(x) <= std::cos(x) + 1e-12);
      REQUIRE(std::cos(x) <= rc.upper_at(x) + 1e-12);
    }
  }
  const Interval r = scbf::sin(Interval{0.0, 3.5});
  CHECK(r.hi == 1.0);
  CHECK(r.lo == doctest::Approx(std::sin(3.5)));
}

TEST_CASE("McCormick product is sound") {
  Sampler s(8);
  for (int k = 0; k < 1000; ++k) {
    Box box{{-1.0, 1.0}, {0.0, 2.0}};
    AffineBound p{AffineForm::variable(2, 0), AffineForm::variable(2, 0), box[0]};
    AffineBound q{AffineForm::variable(2, 1), AffineForm::variable(2, 1), box[1]};
    p.lower += -0.1 * s.unit(s.rng);
    p.range.lo -= 0.1;
    const AffineBound r = relax_product(p, q, box);
    for (int t = 0; t < 10; ++t) {
      std::vector<double> z{s.in(box[0]), s.in(box[1])};
      const double v = z[0] * z[1];
      REQUIRE(r.lower.eval(z) <= v + 1e-12);
      REQUIRE(v <= r.upper.eval(z) + 1e-12);
    }
  }
}

TEST_CASE("bounds enclose the exact kernel") {
  for (const auto& name : benchmark_names()) {
    CAPTURE(name);
    const auto spec = load_benchmark(name);
    const auto p = build_partition(spec, spec.default_grid);
    const auto bm = bound_all(spec, p);
    Sampler s(17);
    for (int k = 0; k < 400; ++k) {
      const int i = static_cast<int>(s.unit(s.rng) * p.size());
      const auto& region = p.regions[i];
      std::vector<double> xw(spec.n), u(spec.m);
      for (int d = 0; d < spec.n; ++d) xw[d] = region.lo[d] + s.unit(s.rng) * (region.hi[d] - region.lo[d]);
      for (int d = 0; d < spec.m; ++d) u[d] = s.in(spec.control_box[d]);
      const auto xv = p.whitening.unapply(xw);
      std::vector<double> x(xv.data(), xv.data() + spec.n);
      const auto row = kernel_row(spec, p, x, u);
      const auto z = joint_point(p, x, u);
      const auto& br = bm.rows[i];
      double listed = 0.0;
      for (const auto& e : br.entries) {
        const double t = row.probs[e.dest];
        listed += t;
        REQUIRE(e.bound.lower.eval(z) <= t + 1e-12);
        REQUIRE(t <= e.bound.upper.eval(z) + 1e-12);
        REQUIRE(e.bound.range.lo <= t + 1e-12);
        REQUIRE(t <= e.bound.range.hi + 1e-12);
      }
      double rest = 0.0;
      for (double v : row.probs) rest += v;
      rest -= listed;
      REQUIRE(rest <= br.tail_mass + 1e-12);
      REQUIRE(br.unsafe.lower.eval(z) <= row.unsafe + 1e-12);
      REQUIRE(row.unsafe <= br.unsafe.upper.eval(z) + 1e-12);
    }
  }
}

TEST_CASE("single region row") {
  const auto spec = load_benchmark("linear-convex");
  std::vector<int> g{1, 1};
  const auto p = build_partition(spec, g);
  const auto bm = bound_all(spec, p);
  REQUIRE(bm.rows.size() == 1);
  REQUIRE(bm.rows[0].entries.size() == 1);
  const auto& row = bm.rows[0];
  Sampler s(2);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> z(4);
    for (int d = 0; d < 4; ++d) z[d] = s.in(row.box[d]);
    const double lo = row.entries[0].bound.lower.eval(z) + row.unsafe.upper.eval(z);
    const double hi = row.entries[0].bound.upper.eval(z) + row.unsafe.lower.eval(z);
    CHECK(lo >= 1.0 - 1e-9);
    CHECK(hi <= 1.0 + 1e-9);
  }
}

TEST_CASE("ranges stay inside the unit interval") {
  const auto spec = load_benchmark("linear-convex");
  const auto p = build_partition(spec, spec.default_grid);
  const auto bm = bound_all(spec, p);
  for (const auto& row : bm.rows) {
    for (const auto& e : row.entries) {
      REQUIRE(e.bound.range.lo >= -1e-9);
      REQUIRE(e.bound.range.hi <= 1.0 + 1e-9);
    }
    REQUIRE(row.unsafe.range.lo >= -1e-9);
    REQUIRE(row.unsafe.range.hi <= 1.0 + 1e-9);
  }
}

TEST_CASE("bound gap shrinks with the cell size") {
  const auto spec = load_benchmark("linear-convex");
  auto mean_gap = [&](std::vector<int> g) {
    const auto p = build_partition(spec, g);
    const auto bm = bound_all(spec, p);
    double sum = 0.0;
    long count = 0;
    for (const auto& row : bm.rows) {
      const auto c = box_center(row.box);
      for (const auto& e : row.entries) {
        sum += e.bound.upper.eval(c) - e.bound.lower.eval(c);
        ++count;
      }
    }
    return sum / static_cast<double>(count);
  };
  CHECK(mean_gap({20, 20}) < mean_gap({10, 10}));
}

TEST_CASE("constant mode has no slopes") {
  const auto spec = load_benchmark("linear-convex");
  const auto p = build_partition(spec, spec.default_grid);
  const auto row = bound_row(spec, p, 13, BoundMode::kConstant);
  for (const auto& e : row.entries) {
    CHECK(e.bound.lower.is_constant());
    CHECK(e.bound.upper.is_constant());
  }
}

TEST_CASE("pinned rows enclose the kernel at their control") {
  for (const auto& name : {"linear-convex", "linear-nonconvex", "temperature-3room"}) {
    CAPTURE(name);
    const auto spec = load_benchmark(name);
    const auto p = build_partition(spec, spec.default_grid);
    const auto bm = bound_all(spec, p);
    const auto folded = fold_x(bm, p);
    const auto cands = control_candidates(spec.control_box);
    for (bool dense : {false, true}) {
      const auto pinned = pin_candidates(spec, p, bm, folded, cands, dense);
      Sampler s(31);
      for (int k = 0; k < 300; ++k) {
        const int i = static_cast<int>(s.unit(s.rng) * p.size());
        const int c = static_cast<int>(s.unit(s.rng) * cands.size());
        const auto& region = p.regions[i];
        std::vector<double> xw(spec.n);
        for (int d = 0; d < spec.n; ++d) xw[d] = region.lo[d] + s.unit(s.rng) * (region.hi[d] - region.lo[d]);
        const auto xv = p.whitening.unapply(xw);
        std::vector<double> x(xv.data(), xv.data() + spec.n);
        const auto row = kernel_row(spec, p, x, cands[c]);
        const RowBox& box = pinned.rows[i][c];
        double covered = 0.0;
        for (std::size_t e = 0; e + 1 < box.size(); ++e) {
          const double t = row.probs[box.dest[e]];
          covered += t;
          REQUIRE(box.lo[e] <= t + 1e-12);
          REQUIRE(t <= box.hi[e] + 1e-12);
        }
        const double rest = 1.0 - covered;  // unsafe entry: unsafe set plus anything unlisted
        REQUIRE(box.lo.back() <= rest + 1e-12);
        REQUIRE(rest <= box.hi.back() + 1e-12);
      }
    }
  }
}
