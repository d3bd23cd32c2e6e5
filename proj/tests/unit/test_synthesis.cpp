#include <cmath>
#include <random>

#include "doctest.h"
#include "minimax.hpp"
#include "scbf/controller.hpp"
#include "scbf/error.hpp"
#include "scbf/synthesis.hpp"
#include "specs.hpp"

using namespace scbf;

namespace {

struct Pipeline {
  SystemSpec spec;
  Partition partition;
  BoundsMatrix bounds;
  FoldedBounds folded;

  Pipeline(SystemSpec s, std::vector<int> grid) : spec(std::move(s)) {
    partition = build_partition(spec, grid);
    bounds = bound_all(spec, partition);
    folded = fold_x(bounds, partition);
  }
};

}  // namespace

TEST_CASE("certified probability") {
  CHECK(certified_probability(0.002, 0.00036, Horizon::finite(50)) == doctest::Approx(0.98));
  CHECK(certified_probability(1.0, 0.0, Horizon::finite(50)) == 0.0);
  CHECK(certified_probability(0.03, 0.00022, Horizon::finite(50)) == doctest::Approx(0.959));
  CHECK(certified_probability(0.2, 0.5, Horizon::unbounded()) == doctest::Approx(0.8));
  double prev = 1.0;
  for (int n = 0; n < 200; n += 10) {
    const double p = certified_probability(0.01, 0.001, Horizon::finite(n));
    CHECK(p <= prev);
    prev = p;
  }
}

TEST_CASE("build_barrier picks eta over the initial regions") {
  const auto spec = load_benchmark("linear-convex");
  const auto p = build_partition(spec, spec.default_grid);
  std::vector<double> b(p.size(), 0.5), bi(p.size(), 0.0);
  for (int i : p.initial_regions()) b[i] = 0.002;
  bi[3] = 0.00036;
  const auto bar = build_barrier(b, bi, p, Horizon::finite(50));
  CHECK(bar.eta == doctest::Approx(0.002));
  CHECK(bar.beta == doctest::Approx(0.00036));
  CHECK(bar.p_safe == doctest::Approx(0.98));
  b[0] = 1.5;
  CHECK_THROWS_AS(build_barrier(b, bi, p, Horizon::finite(50)), Error);
}

TEST_CASE("block dimensions") {
  Pipeline pl(testspec::line(0.5, 0.2, 0.01), {1});
  const auto blocks = build_blocks(pl.bounds, pl.partition);
  REQUIRE(blocks.size() == 1);
  CHECK(blocks[0].hp1.rows() == 6);
  CHECK(blocks[0].hp1.cols() == 2);
  CHECK(blocks[0].hp2.rows() == 6);
  CHECK(blocks[0].hp2.cols() == 2);
  CHECK(blocks[0].hp.size() == 6);

  const auto spec = testspec::line(0.5, 0.2, 0.01);
  const auto p = build_partition(spec, std::vector<int>{3});
  const auto cb = bound_all(spec, p, BoundMode::kConstant);
  for (const auto& blk : build_blocks(cb, p)) CHECK(blk.hp2.isZero());
}

TEST_CASE("dense model size for two regions") {
  Pipeline pl(testspec::line(0.5, 0.2, 0.01, -0.1, 0.1), {2});
  std::vector<std::vector<double>> controls(2, std::vector<double>{0.0});
  LpOptions opt;
  opt.dense = true;
  const auto model = assemble_lp(pl.bounds, pl.folded, pl.partition, Horizon::finite(50), controls, opt);
  // b 2, beta_i 2, t 2, eta and beta 2, lambda 2 * 8, z 2 * 2.
  CHECK(model.num_variables() == 28);
  CHECK(model.metadata.at("primal_variables") == "30");
}

TEST_CASE("sound x fold") {
  const auto spec = testspec::line(0.5, 0.2, 0.01);
  Partition p = build_partition(spec, std::vector<int>{1});
  BoundsMatrix bm;
  bm.n = 1;
  bm.m = 1;
  BoundsRow row;
  row.source = 0;
  row.box = {{0.0, 1.0}, {-1.0, 1.0}};
  AffineBound e;
  e.lower = AffineForm(2, 0.5);
  e.lower.coeff(0) = 0.1;
  e.lower.coeff(1) = 0.2;
  e.upper = AffineForm(2, 0.9);
  e.range = {0.0, 1.0};
  row.entries.push_back({0, e});
  row.unsafe = AffineBound::constant(2, 0.0, 1.0);
  bm.rows.push_back(row);
  const auto f = fold_x(bm, p);
  const auto& lo = f.rows[0].entries[0].lower;
  CHECK(lo.offset() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(lo.coeff(0) == doctest::Approx(0.2));

  // No x-part: the fold only restricts to u.
  row.entries[0].bound.lower.coeff(0) = 0.0;
  bm.rows[0] = row;
  const auto g = fold_x(bm, p);
  CHECK(g.rows[0].entries[0].lower.offset() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(g.rows[0].entries[0].lower.coeff(0) == doctest::Approx(0.2));
}

TEST_CASE("control recovery") {
  Pipeline pl(testspec::line(0.5, 0.0, 0.01), {3});
  std::vector<double> b{0.3, 0.1, 0.7};
  // Dynamics ignore u: the center wins every tie.
  const auto u = extract_control(1, b, pl.folded, pl.spec.control_box);
  CHECK(u[0] == doctest::Approx(0.0));

  const auto c = control_candidates(Box{{-1.0, 1.0}, {0.0, 2.0}});
  REQUIRE(c.size() == 5);
  CHECK(c[0] == std::vector<double>{0.0, 1.0});
  CHECK(c[1] == std::vector<double>{-1.0, 0.0});
  CHECK(c[4] == std::vector<double>{1.0, 2.0});
}

TEST_CASE("worst-case value is concave in the control") {
  // The corners of U therefore contain a minimizer.
  Pipeline pl(testspec::line(1.0, 0.4, 0.01), {7});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const int i = static_cast<int>(unit(rng) * 7);
    std::vector<double> b(7);
    for (auto& v : b) v = unit(rng);
    const double u1 = -1.0 + 2.0 * unit(rng), u2 = -1.0 + 2.0 * unit(rng), lam = unit(rng);
    const auto& row = pl.folded.rows[i];
    const double v1 = worst_case_value(row, b, std::vector<double>{u1});
    const double v2 = worst_case_value(row, b, std::vector<double>{u2});
    const double vm = worst_case_value(row, b, std::vector<double>{lam * u1 + (1 - lam) * u2});
    REQUIRE(vm >= lam * v1 + (1 - lam) * v2 - 1e-9);

    const auto pick = choose_control(row, b, control_candidates(pl.spec.control_box));
    double scan = 1e300;
    for (int g = 0; g <= 2000; ++g) {
      scan = std::min(scan, worst_case_value(row, b, std::vector<double>{-1.0 + g / 1000.0}));
    }
    REQUIRE(pick.value <= scan + 1e-9);
  }
}

TEST_CASE("lookup and fallback") {
  const auto spec = load_benchmark("linear-convex");
  const auto p = build_partition(spec, spec.default_grid);
  Controller ctl;
  for (int i = 0; i < p.size(); ++i) ctl.controls.push_back({0.01 * i, -0.01 * i});
  ctl.fallback = default_fallback(spec.control_box);
  CHECK(ctl.fallback == std::vector<double>{0.0, 0.0});
  CHECK(lookup(ctl, p, std::vector<double>{-0.95, -0.95}) == ctl.controls[0]);
  CHECK(lookup(ctl, p, std::vector<double>{2.0, 0.0}) == ctl.fallback);
  CHECK(default_fallback(Box{{0.2, 0.5}}) == std::vector<double>{0.2});
}

TEST_CASE("initial set must be covered") {
  Pipeline pl(testspec::line(0.5, 0.2, 0.01), {3});
  for (auto& r : pl.partition.regions) r.touches_initial = false;
  SynthesisOptions opt;
  CHECK_THROWS_WITH(synthesize(pl.spec, pl.partition, pl.bounds, pl.folded, opt),
                    doctest::Contains("initial set not covered"));
}

TEST_CASE("routes agree and certificates hold against the rows") {
  Pipeline pl(load_benchmark("linear-convex"), {4, 4});
  SynthesisOptions dual, cols;
  dual.route = LpRoute::kDual;
  cols.route = LpRoute::kColumns;
  const auto a = synthesize(pl.spec, pl.partition, pl.bounds, pl.folded, dual);
  const auto b = synthesize(pl.spec, pl.partition, pl.bounds, pl.folded, cols);
  CHECK(a.barrier.objective() == doctest::Approx(b.barrier.objective()).epsilon(1e-6));
  REQUIRE(a.has_model);
  const auto sol = solve_lp(a.model);
  REQUIRE(sol.optimal());
  CHECK(max_violation(a.model, sol.x) <= 1e-8);
}

TEST_CASE("infinite horizon keeps beta at zero") {
  Pipeline pl(testspec::line(0.5, 0.2, 0.01), {5});
  SynthesisOptions opt;
  opt.horizon = Horizon::unbounded();
  const auto r = synthesize(pl.spec, pl.partition, pl.bounds, pl.folded, opt);
  CHECK(r.barrier.beta == 0.0);
  for (double v : r.barrier.beta_i) CHECK(v == 0.0);
}

TEST_CASE("constant bounds never certify more") {
  const auto spec = testspec::line(0.9, 0.3, 0.01);
  const std::vector<int> g{5};
  const auto p = build_partition(spec, g);
  SynthesisOptions opt;
  opt.pin_controls = false;
  const auto fa = bound_all(spec, p, BoundMode::kAffine);
  const auto fc = bound_all(spec, p, BoundMode::kConstant);
  const auto ra = synthesize(spec, p, fa, opt);
  const auto rc = synthesize(spec, p, fc, opt);
  CHECK(rc.barrier.objective() >= ra.barrier.objective() - 1e-9);
}

TEST_CASE("zero gap on a small line") {
  for (int cells : {3, 5}) {
    CAPTURE(cells);
    Pipeline pl(testspec::line(0.9, 0.3, 0.01), {cells});
    SynthesisOptions opt;
    opt.pin_controls = false;
    const auto r = synthesize(pl.spec, pl.partition, pl.bounds, pl.folded, opt);
    oracle::Minimax mm(pl.folded, pl.partition, 50, pl.spec.control_box[0], 201);
    const double at_lp = mm.value(r.barrier.b);
    CHECK(at_lp == doctest::Approx(r.barrier.objective()).epsilon(1e-6));
    std::vector<std::vector<double>> starts{r.barrier.b, std::vector<double>(cells, 0.0),
                                            std::vector<double>(cells, 1.0)};
    const double best = mm.minimize(starts, 1);
    CHECK(std::abs(best - r.barrier.objective()) <= 1e-6);
  }
}

TEST_CASE("dual route recovers from an early singular basis") {
  Pipeline pl(load_benchmark("linear-convex"), {4, 4});
  SynthesisOptions dual, cols;
  dual.route = LpRoute::kDual;
  cols.route = LpRoute::kColumns;
  dual.horizon = cols.horizon = Horizon::unbounded();
  const auto a = synthesize(pl.spec, pl.partition, pl.bounds, pl.folded, dual);
  const auto b = synthesize(pl.spec, pl.partition, pl.bounds, pl.folded, cols);
  CHECK(a.barrier.objective() == doctest::Approx(b.barrier.objective()).epsilon(1e-6));
}
