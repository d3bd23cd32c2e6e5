#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "scbf/error.hpp"
#include "scbf/io.hpp"
#include "scbf/synthesis.hpp"
#include "scbf/validation.hpp"
#include "specs.hpp"

using namespace scbf;

TEST_CASE("Clopper-Pearson lower bound") {
  CHECK(binomial_lower_bound(500, 500, 0.95) == doctest::Approx(0.9940).epsilon(1e-4));
  CHECK(binomial_lower_bound(0, 500, 0.95) == 0.0);
  // scipy.stats.beta.ppf(0.05, 494, 7)
  CHECK(binomial_lower_bound(494, 500, 0.95) == doctest::Approx(0.9764534145).epsilon(1e-9));
  for (int s : {1, 10, 250, 480, 499, 500}) {
    CAPTURE(s);
    CHECK(binomial_lower_bound(s, 500, 0.95) ==
          doctest::Approx(oracle::clopper_pearson_lower(s, 500, 0.95)).epsilon(1e-9));
  }
}

TEST_CASE("stream generator is reproducible") {
  StreamRng a(7, 3), b(7, 3), c(7, 4);
  for (int k = 0; k < 100; ++k) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
  }
  StreamRng n(1, 1);
  double mean = 0.0, sq = 0.0;
  const int count = 200000;
  for (int k = 0; k < count; ++k) {
    const double v = n.normal();
    mean += v;
    sq += v * v;
  }
  mean /= count;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(sq / count - 1.0) < 0.02);
}

TEST_CASE("simulation basics") {
  const auto spec = load_benchmark("linear-convex");
  const auto p = build_partition(spec, spec.default_grid);
  Controller ctl;
  ctl.controls.assign(p.size(), {0.0, 0.0});
  ctl.fallback = {0.0, 0.0};
  McOptions opt;
  opt.trials = 1;
  opt.steps = 0;
  CHECK(simulate(spec, p, ctl, opt).empirical_safety == 1.0);

  opt.trials = 200;
  opt.steps = 50;
  opt.seed = 4;
  const auto r1 = simulate(spec, p, ctl, opt);
  const auto r2 = simulate(spec, p, ctl, opt);
  CHECK(r1.violations == r2.violations);
  CHECK(r1.first_exit == r2.first_exit);
  // Open loop 1.05 x from [0.4, 0.5] drifts out of [-1, 1].
  CHECK(r1.violations > 150);
}

TEST_CASE("certificate check catches injected faults") {
  const auto spec = load_benchmark("temperature-3room");
  const auto p = build_partition(spec, spec.default_grid);
  const auto bm = bound_all(spec, p);
  SynthesisOptions opt;
  const auto r = synthesize(spec, p, bm, opt);
  auto ok = check_certificate(spec, p, r.barrier, r.controller, 16);
  CHECK(ok.passed);
  CHECK(ok.max_slack <= 1e-6);

  Barrier bad = r.barrier;
  bad.b[5] = -0.1;
  auto rep = check_certificate(spec, p, bad, r.controller, 16);
  CHECK_FALSE(rep.nonnegative);
  CHECK_FALSE(rep.passed);
  REQUIRE(rep.negative_regions.size() == 1);
  CHECK(rep.negative_regions[0] == 5);
}

TEST_CASE("region samples") {
  const auto s = region_samples(Box{{0.0, 1.0}, {2.0, 3.0}}, 64);
  REQUIRE(s.size() == 64);
  CHECK(s[0] == std::vector<double>{0.0, 2.0});
  CHECK(s[4] == std::vector<double>{0.5, 2.5});
  for (const auto& x : s) CHECK(box_contains(Box{{0.0, 1.0}, {2.0, 3.0}}, x));
  CHECK(region_samples(Box{{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}}, 2).size() == 9);
}

TEST_CASE("csv round trips") {
  const auto spec = load_benchmark("linear-nonconvex");
  const auto p = build_partition(spec, spec.default_grid);
  Controller ctl;
  for (int i = 0; i < p.size(); ++i) ctl.controls.push_back({0.1 * (i % 7) - 0.3, 1.0 / (i + 3)});
  ctl.fallback = {0.0, 0.0};
  std::stringstream ss;
  write_controller_csv(ss, ctl, p);
  const auto back = read_controller_csv(ss);
  check_tag(back.tag, p, 2);
  CHECK(back.controller.controls == ctl.controls);

  std::vector<int> other{5, 5};
  CHECK_THROWS_AS(check_tag(back.tag, build_partition(spec, other), 2), Error);

  std::vector<double> b(p.size()), bi(p.size(), 0.0);
  for (int i = 0; i < p.size(); ++i) b[i] = 1.0 / (i + 2);
  for (int i : p.initial_regions()) b[i] = 0.01;
  const auto bar = build_barrier(b, bi, p, Horizon::finite(50));
  std::stringstream bs;
  write_barrier_csv(bs, bar, p, 2);
  const auto bf = read_barrier_csv(bs);
  CHECK(bf.b == bar.b);
}

TEST_CASE("summary schema") {
  RunSummary s;
  s.benchmark = "linear-convex";
  s.K = 100;
  s.grid_counts = {10, 10};
  s.eta = 0.5;
  s.beta = 0.001;
  s.p_safe = 0.45;
  s.lp_variables = 10;
  s.lp_constraints = 5;
  const std::string golden =
      R"({"benchmark":"linear-convex","K":100,"grid_counts":[10,10],"eta":0.5,"beta":0.001,)"
      R"("p_safe":0.45,"synth_seconds":null,"bound_seconds":null,)"
      R"("lp_variables":10,"lp_constraints":5,"mc_empirical":null,"mc_lower_bound":null})";
  std::string j = summary_json(s);
  std::string compact;
  bool in_str = false;
  for (char c : j) {
    if (c == '"') in_str = !in_str;
    if (!in_str && (c == ' ' || c == '\n')) continue;
    compact += c;
  }
  CHECK(compact == golden);
  const std::vector<std::string> fields{"benchmark", "K", "grid_counts", "eta", "beta", "p_safe",
                                        "synth_seconds", "bound_seconds", "lp_variables",
                                        "lp_constraints", "mc_empirical", "mc_lower_bound"};
  CHECK(run_summary_fields() == fields);
}
