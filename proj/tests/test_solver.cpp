#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "mvmdp/diagnostics.hpp"
#include "mvmdp/error.hpp"
#include "mvmdp/models.hpp"
#include "mvmdp/solver.hpp"
#include "oracles.hpp"

using namespace mvmdp;

namespace {

void check_run(const TabularMdp& m, const SolveReport& r) {
  for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k].J >= r.trace[k - 1].J - 1e-10);
  if (!r.converged()) return;
  CHECK(std::abs(r.y_star - r.eval.mean) <= 1e-7);
  CHECK(optimality_violations(m, r.policy, r.s0).empty());
}

}  // namespace

TEST_CASE("single-policy model converges after one improvement") {
  MdpData d;
  d.horizon = 3;
  d.num_states = 2;
  d.num_actions = 1;
  d.lambda = 1.0;
  d.admissible = {{0}, {0}};
  KernelStage k;
  k.rows = {{{1, 1.0}}, {{0, 1.0}}};
  k.reward = {2.0, -0.5};
  d.stages = {k, k, k};
  TabularMdp m(d);
  for (double y0 : {-10.0, 0.0, 3.5, 40.0}) {
    SolveOptions o;
    o.y0_init = y0;
    const SolveReport r = solve(m, 0, o);
    CHECK(r.converged());
    CHECK(r.y_star == doctest::Approx(3.5));
    CHECK(r.eval.mv == doctest::Approx(3.5));
    CHECK(r.trace.size() <= 2);
  }
}

TEST_CASE("max_iters = 0 reports non-convergence") {
  const auto m = build_inventory({3, 3, 4, 2, 1, 3, 2.0});
  SolveOptions o;
  o.max_iters = 0;
  const SolveReport r = solve(m, 0, o);
  CHECK(r.status == SolveStatus::max_iters);
  CHECK_FALSE(r.converged());
  CHECK(r.trace.empty());
  CHECK(to_string(r.status) == "max_iters");
}

TEST_CASE("monotone improvement and fixed-point certificate on random instances") {
  std::mt19937_64 rng(21);
  int converged = 0;
  for (int rep = 0; rep < 80; ++rep) {
    const auto z = helpers::small_sizes(rng, 0.5 + (rng() % 4) * 0.5);
    const auto m = build_random(rng(), z);
    for (double y0 : {-2.0, 0.0, 1.0, 4.0}) {
      SolveOptions o;
      o.y0_init = y0;
      const SolveReport r = solve(m, 0, o);
      check_run(m, r);
      converged += r.converged();
    }
  }
  CHECK(converged >= 300);
}

TEST_CASE("converged value never exceeds the global optimum") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 40; ++rep) {
    const auto z = helpers::small_sizes(rng, 1.0);
    const auto m = build_random(rng(), z);
    const double best = oracle::best_mv(oracle::all_policy_moments(m, 0), m.lambda());
    const SolveReport r = solve(m, 0);
    REQUIRE(r.has_policy);
    CHECK(r.eval.mv <= best + 1e-9);
  }
}

TEST_CASE("default start is the myopic mean") {
  const auto m = build_inventory({3, 3, 4, 2, 1, 3, 2.0});
  const SolveReport r = solve(m, 1);
  CHECK(r.y0_init == doctest::Approx(markov_policy_mean(m, myopic_policy(m), 1)));
  CHECK(r.y0_init == doctest::Approx(default_y0_init(m, 1)));
}

TEST_CASE("multi-start shares the lattice and matches single solves") {
  const auto m = build_inventory({4, 4, 4, 2, 1, 3, 2.0});
  const std::vector<double> inits{-50.0, 0.0, 10.0, 60.0};
  const MultiStartReport ms = solve_multi_start(m, 2, inits);
  REQUIRE(ms.runs.size() == 4);
  for (std::size_t i = 0; i < inits.size(); ++i) {
    SolveOptions o;
    o.y0_init = inits[i];
    const SolveReport r = solve(m, 2, o);
    CHECK(r.y_star == ms.runs[i].y_star);
    CHECK(r.trace.size() == ms.runs[i].trace.size());
    check_run(m, r);
  }
  CHECK(ms.runs[ms.best].eval.mv >= ms.runs[0].eval.mv);
  CHECK_FALSE(ms.distinct_optima.empty());
}

TEST_CASE("quantized solve") {
  const auto m = build_inventory({3, 3, 4, 2, 1, 3, 2.0});
  SolveOptions o;
  o.quantize = 0.5;
  o.y0_init = 5.0;
  const SolveReport r = solve(m, 0, o);
  CHECK(r.has_policy);
  SolveOptions e;
  e.y0_init = 5.0;
  const SolveReport x = solve(m, 0, e);
  CHECK(std::abs(r.eval.mv - x.eval.mv) < 0.5);
}

TEST_CASE("linear structure fit and guards") {
  const auto q = build_queueing({4, 1.0, 0.5, 0.5, 0.5, 2.0, 1.0, 0.05, 2.0, 1000000});
  const LinearFit f = fit_linear_structure(q, 4, -1.0, 8, -2.0, 12);
  CHECK(f.slope == doctest::Approx(-5.0));   // state values 0.2 and 0.4
  CHECK(f.predicted == doctest::Approx(-3.0));
  CHECK_THROWS_AS(fit_linear_structure(q, 4, -1.0, 4, -2.0, 12), ConfigError);
  const auto inv = build_inventory({3, 3, 4, 2, 1, 3, 2.0});
  CHECK_THROWS_AS(linear_structure_extrapolate(inv, 0, 1, 2), ConfigError);
}

TEST_CASE("linear structure on a small queue") {
  const auto q = build_queueing({3, 2.0, 0.5, 0.5, 0.5, 2.0, 1.0, 0.1, 2.0, 1000000});
  const LinearFit f = linear_structure_extrapolate(q, 8, 10, 12);
  SolveOptions o;
  const SolveReport r = solve(q, 12, o);
  REQUIRE(r.converged());
  CHECK(std::abs(f.predicted - r.y_star) < 0.05);
}

TEST_CASE("occupancy and mean to go are consistent") {
  const auto m = build_inventory({3, 3, 4, 2, 1, 3, 2.0});
  const SolveReport r = solve(m, 1);
  const auto occ = occupancy(m, r.policy, 1);
  const auto mtg = mean_to_go(m, r.policy);
  CHECK(occ[0].size() == 1);
  CHECK(mtg[0][occ[0][0].first] == doctest::Approx(r.eval.mean).epsilon(1e-12));
  for (const auto& st : occ) {
    double mass = 0.0;
    for (auto [c, p] : st) mass += p;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  }
}
