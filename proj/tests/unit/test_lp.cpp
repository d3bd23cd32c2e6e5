#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "scbf/controller.hpp"
#include "scbf/lp.hpp"

using namespace scbf;

TEST_CASE("bounded single variable") {
  LpModel m;
  const int x = m.add_variable("x", -kInf, kInf, 1.0);
  m.add_row("ge3", Sense::kGe, 3.0, {{x, 1.0}});
  m.add_row("le10", Sense::kLe, 10.0, {{x, 1.0}});
  const auto sol = solve_lp(m);
  REQUIRE(sol.optimal());
  CHECK(sol.x[0] == doctest::Approx(3.0));
  CHECK(sol.objective == doctest::Approx(3.0));
}

TEST_CASE("small textbook LP with duals") {
  // max 3x + 5y  s.t. x <= 4, 2y <= 12, 3x + 2y <= 18.
  LpModel m;
  const int x = m.add_variable("x", 0.0, kInf, -3.0);
  const int y = m.add_variable("y", 0.0, kInf, -5.0);
  m.add_row("a", Sense::kLe, 4.0, {{x, 1.0}});
  m.add_row("b", Sense::kLe, 12.0, {{y, 2.0}});
  m.add_row("c", Sense::kLe, 18.0, {{x, 3.0}, {y, 2.0}});
  const auto sol = solve_lp(m);
  REQUIRE(sol.optimal());
  CHECK(sol.objective == doctest::Approx(-36.0));
  CHECK(sol.x[0] == doctest::Approx(2.0));
  CHECK(sol.x[1] == doctest::Approx(6.0));
  CHECK(sol.duals[0] == doctest::Approx(0.0));
  CHECK(sol.duals[1] == doctest::Approx(-1.5));
  CHECK(sol.duals[2] == doctest::Approx(-1.0));
  CHECK(max_violation(m, sol.x) <= 1e-9);
}

TEST_CASE("infeasible and unbounded models") {
  LpModel a;
  const int x = a.add_variable("x", 0.0, kInf, 1.0);
  a.add_row("lo", Sense::kGe, 5.0, {{x, 1.0}});
  a.add_row("hi", Sense::kLe, 2.0, {{x, 1.0}});
  CHECK(solve_lp(a).status == LpStatus::kInfeasible);

  LpModel b;
  const int y = b.add_variable("y", 0.0, kInf, -1.0);
  b.add_row("r", Sense::kGe, 1.0, {{y, 1.0}});
  CHECK(solve_lp(b).status == LpStatus::kUnbounded);
}

TEST_CASE("equality rows and degenerate vertices") {
  // Assignment-like problem, highly degenerate.
  LpModel m;
  const double c[3][3] = {{4, 1, 3}, {2, 0, 5}, {3, 2, 2}};
  int v[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) v[i][j] = m.add_variable("x", 0.0, kInf, c[i][j]);
  for (int i = 0; i < 3; ++i) m.add_row("r", Sense::kEq, 1.0, {{v[i][0], 1}, {v[i][1], 1}, {v[i][2], 1}});
  for (int j = 0; j < 3; ++j) m.add_row("c", Sense::kEq, 1.0, {{v[0][j], 1}, {v[1][j], 1}, {v[2][j], 1}});
  const auto sol = solve_lp(m);
  REQUIRE(sol.optimal());
  CHECK(sol.objective == doctest::Approx(5.0));
}

TEST_CASE("column generation resumes from the current basis") {
  LpModel m;
  const int x = m.add_variable("x", 0.0, kInf, 2.0);
  m.add_row("cover", Sense::kGe, 4.0, {{x, 1.0}});
  RevisedSimplex s(m);
  auto sol = s.solve();
  REQUIRE(sol.optimal());
  CHECK(sol.objective == doctest::Approx(8.0));
  s.add_column(1.0, 0.0, kInf, {{0, 1.0}});
  sol = s.resolve();
  REQUIRE(sol.optimal());
  CHECK(sol.objective == doctest::Approx(4.0));
}

TEST_CASE("MPS output names every row and column") {
  LpModel m;
  const int x = m.add_variable("x", 0.0, 5.0, 1.0);
  m.add_row("r1", Sense::kGe, 1.0, {{x, 2.0}});
  std::ostringstream out;
  write_mps(m, out);
  const std::string s = out.str();
  CHECK(s.find("ROWS") != std::string::npos);
  CHECK(s.find("r1") != std::string::npos);
  CHECK(s.find("BOUNDS") != std::string::npos);
  CHECK(s.find("ENDATA") != std::string::npos);
}

TEST_CASE("greedy inner maximization") {
  std::vector<double> w{0.9, 0.5, 0.1}, lo{0.1, 0.1, 0.1}, hi{0.6, 0.6, 0.6};
  auto g = greedy_inner(w, lo, hi);
  CHECK(g.value == doctest::Approx(0.70));
  CHECK(g.t[0] == doctest::Approx(0.6));
  CHECK(g.t[1] == doctest::Approx(0.3));
  CHECK(g.t[2] == doctest::Approx(0.1));

  w = {1.0, 0.0};
  lo = {0.0, 0.0};
  hi = {1.0, 1.0};
  g = greedy_inner(w, lo, hi);
  CHECK(g.value == doctest::Approx(1.0));
  CHECK(g.t[0] == doctest::Approx(1.0));

  w = {0.4, 0.4, 0.4};
  lo = {0.0, 0.2, 0.1};
  hi = {0.9, 0.5, 0.7};
  CHECK(greedy_inner(w, lo, hi).value == doctest::Approx(0.4));

  lo = {0.5, 0.5, 0.5};
  CHECK_THROWS_WITH(greedy_inner(w, lo, hi), doctest::Contains("bounds inconsistent"));
}

TEST_CASE("greedy agrees with vertex enumeration and the dual formula") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const int n = 2 + static_cast<int>(unit(rng) * 6);
    std::vector<double> w(n), lo(n), hi(n);
    for (int j = 0; j < n; ++j) {
      w[j] = unit(rng);
      lo[j] = unit(rng) / n;
      hi[j] = lo[j] + unit(rng);
    }
    double s_hi = 0.0;
    for (double h : hi) s_hi += h;
    if (s_hi < 1.0) continue;
    const double g = greedy_inner(w, lo, hi).value;
    REQUIRE(std::abs(g - oracle::box_simplex_max_vertices(w, lo, hi)) <= 1e-12);
    REQUIRE(std::abs(g - oracle::box_simplex_max(w, lo, hi)) <= 1e-12);
  }
}
