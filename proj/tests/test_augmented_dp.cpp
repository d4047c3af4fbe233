#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "mvmdp/augmented_dp.hpp"
#include "mvmdp/error.hpp"
#include "mvmdp/lattice.hpp"
#include "mvmdp/models.hpp"
#include "mvmdp/policy_eval.hpp"
#include "oracles.hpp"

using namespace mvmdp;

TEST_CASE("common quantum") {
  CHECK(common_quantum({0.5, 1.0, 1.5}) == doctest::Approx(0.5));
  CHECK(common_quantum({3.0, -12.0, 0.0}) == doctest::Approx(3.0));
  CHECK(common_quantum({0.0, 0.0}) == 1.0);
  CHECK(common_quantum({0.01, 0.03, 2.0}) == doctest::Approx(0.01));
  CHECK(common_quantum({1.0, std::sqrt(2.0)}) == 0.0);
}

TEST_CASE("inventory lattice values are the root minus integers") {
  const auto m = build_inventory({});
  const YLattice lat = reachable_lattice(m, 1, 57.2);
  CHECK(lat.shape().mode == LatticeMode::integral);
  CHECK(lat.y(0, 0) == doctest::Approx(57.2));
  for (int t = 0; t <= m.horizon(); t += 3)
    for (std::size_t i = 0; i < lat.stage(t).num_ys(); ++i) {
      const double k = 57.2 - lat.y(t, i);
      CHECK(std::abs(k - std::round(k)) < 1e-9);
    }
  // y_1 = y_0 - r_0 over the stage-0 outcomes from s = 1
  double rlo = 1e9, rhi = -1e9;
  for (std::size_t k = 0; k < m.admissible(1).size(); ++k)
    m.for_each_outcome(0, m.pair(1, static_cast<int>(k)), [&](std::size_t, double p, int, double r) {
      if (p <= 0) return;
      rlo = std::min(rlo, r);
      rhi = std::max(rhi, r);
    });
  CHECK(lat.y(1, 0) == doctest::Approx(57.2 - rhi));
  CHECK(lat.y(1, lat.stage(1).num_ys() - 1) == doctest::Approx(57.2 - rlo));
}

TEST_CASE("irrational rewards fall back to the sparse lattice") {
  MdpData d;
  d.horizon = 2;
  d.num_states = 1;
  d.num_actions = 2;
  d.lambda = 1.0;
  d.admissible = {{0, 1}};
  KernelStage k;
  k.rows = {{{0, 1.0}}, {{0, 1.0}}};
  k.reward = {1.0, std::sqrt(2.0)};
  d.stages = {k, k};
  TabularMdp m(d);
  const YLattice lat = reachable_lattice(m, 0, 0.0);
  CHECK(lat.shape().mode == LatticeMode::sparse);
  CHECK(lat.stage(2).num_ys() == 3);  // 2, 1 + sqrt 2, 2 sqrt 2
  const auto sol = backward_induction(m, 0, 3.0);
  // deterministic rewards: best total closest to y with mean - lambda (mean - y)^2 = x - (x - 3)^2
  const double best = std::max({2.0 - 1.0, 1 + std::sqrt(2.0) - std::pow(1 + std::sqrt(2.0) - 3, 2),
                                2 * std::sqrt(2.0) - std::pow(2 * std::sqrt(2.0) - 3, 2)});
  CHECK(sol.root_value(0) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("cell cap raises LatticeExplosion") {
  const auto m = build_inventory({});
  LatticeOptions o;
  o.cell_cap = 1000;
  CHECK_THROWS_AS(reachable_lattice(m, 0, 0.0, o), LatticeExplosion);
}

TEST_CASE("inner DP equals the best history-dependent policy (kernel models)") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 40; ++rep) {
    const auto z = helpers::small_sizes(rng, 0.5 + (rng() % 4) * 0.5);
    const auto m = build_random(rng(), z);
    const int s0 = static_cast<int>(rng() % z.num_states);
    const auto all = oracle::all_policy_moments(m, s0);
    for (double y : {-1.0, 0.3, 1.25, 2.0, 3.7}) {
      const auto sol = backward_induction(m, s0, y);
      CHECK(sol.root_value(s0) == doctest::Approx(oracle::best_pseudo(all, m.lambda(), y)).epsilon(1e-12));
      const EvalResult ev = evaluate(m, sol.policy(), s0, y);
      CHECK(ev.pseudo_mv == doctest::Approx(sol.root_value(s0)).epsilon(1e-12));
    }
  }
}

TEST_CASE("inner DP equals the best history-dependent policy (noise models)") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto m = oracle::random_noise_model(seed, 3, 2, 3, 2, 1.5);
    const auto all = oracle::all_policy_moments(m, 0);
    for (double y : {-2.0, 0.0, 0.75, 2.5}) {
      const auto sol = backward_induction(m, 0, y);
      CHECK(sol.root_value(0) == doctest::Approx(oracle::best_pseudo(all, m.lambda(), y)).epsilon(1e-12));
    }
  }
}

TEST_CASE("stored values are the best Q values") {
  const auto m = build_inventory({3, 4, 4, 2, 1, 3, 2.0});
  const auto sol = backward_induction(m, 2, 10.0);
  for (int t = 0; t < 3; ++t) {
    const auto& g = sol.lattice().stage(t);
    for (std::size_t c = 0; c < g.cells(); c += 7) {
      const auto q = sol.q_values(m, t, c);
      double best = -1e300;
      for (double x : q)
        if (!std::isnan(x)) best = std::max(best, x);
      CHECK(sol.value(t, c) == doctest::Approx(best).epsilon(1e-12));
      const int s = g.states[c / g.num_ys()];
      CHECK(q[m.action_slot(s, sol.action(t, c))] >= best - 1e-9);
    }
  }
}

TEST_CASE("ties prefer the incumbent, else the lowest action") {
  // Two identical actions.
  MdpData d;
  d.horizon = 1;
  d.num_states = 1;
  d.num_actions = 3;
  d.lambda = 1.0;
  d.admissible = {{0, 1, 2}};
  KernelStage k;
  k.rows = {{{0, 1.0}}, {{0, 1.0}}, {{0, 1.0}}};
  k.reward = {0.0, 1.0, 1.0};
  d.stages = {k};
  TabularMdp m(d);
  const auto sol = backward_induction(m, 0, 1.0);
  const std::size_t root = sol.root_cell(0);
  CHECK(sol.action(0, root) == 1);
  CHECK(sol.tie_count(0, root) == 2);
  CHECK(sol.tied_actions(m, 0, root) == std::vector<int>{1, 2});

  const AugmentedPolicy inc = sol.policy().with_action(0, root, 2);
  InnerOptions o;
  o.incumbent = &inc;
  const auto sol2 = solve_on_lattice(m, sol.lattice(), o);
  CHECK(sol2.action(0, root) == 2);
}

TEST_CASE("fingerprints identify the policy subtree") {
  const auto m = build_inventory({3, 3, 4, 2, 1, 3, 2.0});
  const auto a = backward_induction(m, 0, 5.0);
  const auto b = backward_induction(m, 0, 5.0);
  CHECK(a.root_fingerprint(0) == b.root_fingerprint(0));
  // different inner-optimal policies give different fingerprints
  const auto far = backward_induction(m, 0, -20.0);
  CHECK(a.root_fingerprint(0) != far.root_fingerprint(0));
}

TEST_CASE("quantized DP stays close to the exact one") {
  const auto m = build_queueing({4, 1.0, 0.5, 0.5, 0.5, 2.0, 1.0, 0.05, 2.0, 1000000});
  const int s0 = 10;
  const auto exact = backward_induction(m, s0, -3.0);
  const auto q = quantized_backward_induction(m, s0, -3.0, 0.05);
  CHECK(std::abs(exact.root_value(s0) - q.root_value(s0)) < 1e-6);
  const auto coarse = quantized_backward_induction(m, s0, -3.0, 0.2);
  CHECK(coarse.max_snap_distance() <= 0.1 + 1e-12);
  CHECK(std::abs(exact.root_value(s0) - coarse.root_value(s0)) < 0.5);
}

TEST_CASE("thread count does not change the tables") {
  const auto m = build_inventory({4, 6, 4, 2, 1, 3, 2.0});
  InnerOptions one, four;
  one.threads = 1;
  four.threads = 4;
  const auto a = backward_induction(m, 2, 12.0, one);
  const auto b = backward_induction(m, 2, 12.0, four);
  for (int t = 0; t <= m.horizon(); ++t) CHECK(a.values(t) == b.values(t));
  CHECK(a.root_fingerprint(2) == b.root_fingerprint(2));
}
