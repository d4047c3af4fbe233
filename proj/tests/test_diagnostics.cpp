#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "mvmdp/augmented_dp.hpp"
#include "mvmdp/diagnostics.hpp"
#include "mvmdp/models.hpp"
#include "mvmdp/policy_eval.hpp"
#include "mvmdp/solver.hpp"

using namespace mvmdp;

TEST_CASE("identical policies have zero difference and derivative") {
  const auto mdp = build_random(11, {3, 2, 3, 1.0});
  const auto u = helpers::random_policy(mdp, 0, 1.0, 5);
  const HistoryPolicyView view(u);
  const auto pair = build_chain_pair(mdp, view, view, 0);
  CHECK(std::abs(performance_difference(pair.u, pair.v)) <= 1e-14);
  CHECK(std::abs(performance_derivative(pair.u, pair.v)) <= 1e-14);
}

TEST_CASE("chain moments match the forward distribution") {
  const auto mdp = build_random(12, {3, 3, 3, 0.7});
  const auto u = helpers::random_policy(mdp, 1, -0.5, 9);
  const auto c = build_chain(mdp, HistoryPolicyView(u), 1);
  const auto e = evaluate(mdp, u, 1, -0.5);
  CHECK(c.mean() == doctest::Approx(e.mean).epsilon(1e-13));
  CHECK(c.y_ref == doctest::Approx(e.mean).epsilon(1e-13));
  CHECK(c.pseudo_value() == doctest::Approx(e.mv).epsilon(1e-12));
  for (const auto& d : c.occupancy()) CHECK(d.sum() == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(g_recursion_residual(c) <= 1e-12);
}

TEST_CASE("risk-neutral difference is the plain mean difference") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto mdp = build_random(100 + i, helpers::small_sizes(rng, 0.0));
    const auto u = helpers::random_policy(mdp, 0, 0.0, rng());
    const auto v = helpers::random_policy(mdp, 0, 0.0, rng());
    const auto pair = build_chain_pair(mdp, HistoryPolicyView(u), HistoryPolicyView(v), 0);
    const double direct = evaluate(mdp, v, 0, 0.0).mean - evaluate(mdp, u, 0, 0.0).mean;
    CHECK(performance_difference(pair.u, pair.v) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("difference and derivative formulas on random pairs") {
  std::mt19937_64 rng(42);
  int n = 0;
  for (int i = 0; i < 200; ++i) {
    auto sizes = helpers::small_sizes(rng, 0.25 + (rng() % 8) * 0.25);
    sizes.num_states += 1;
    const auto mdp = build_random(1000 + i, sizes);
    const int s0 = static_cast<int>(rng() % mdp.num_states());
    const double y0 = -1.0 + (rng() % 9) * 0.25;
    const HistoryPolicyView u(helpers::random_policy(mdp, s0, y0, rng()));
    const HistoryPolicyView v(helpers::random_policy(mdp, s0, y0, rng()));
    const auto rep = diagnose(mdp, u, v, s0);
    CHECK(std::abs(rep.difference_formula - rep.direct_difference) <=
          1e-10 * std::max(1.0, std::abs(rep.direct_difference)));
    const double f = rep.finite_difference.richardson;
    CHECK(std::abs(rep.derivative_formula - f) <= 1e-6 * (1 + std::abs(f)));
    CHECK(rep.g_residual <= 1e-12);
    ++n;
  }
  CHECK(n == 200);
}

TEST_CASE("history-independent comparison across different roots") {
  // v viewed from a different root is still a valid history-dependent policy
  const auto mdp = build_random(77, {3, 3, 3, 1.5});
  const HistoryPolicyView u(helpers::random_policy(mdp, 0, 0.0, 1));
  const HistoryPolicyView v(helpers::random_policy(mdp, 0, 0.75, 2));
  const auto rep = diagnose(mdp, u, v, 0);
  CHECK(std::abs(rep.difference_formula - rep.direct_difference) <= 1e-10);
}

TEST_CASE("optimality scan of the inner DP policy") {
  int perturbed = 0;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto mdp = build_random(seed, {4, 3, 3, 1.0});
    const auto sol = backward_induction(mdp, 0, 1.0);
    CHECK(optimality_violations(mdp, sol.policy(), 0).empty());

    // a strictly worse action at the root is reported at exactly that cell
    const std::size_t root = sol.root_cell(0);
    const auto q = sol.q_values(mdp, 0, root);
    const auto adm = mdp.admissible(0);
    std::size_t slot = q.size();
    for (std::size_t k = 0; k < q.size(); ++k)
      if (q[k] < sol.value(0, root) - 1e-6) slot = k;
    if (slot == q.size()) continue;
    const auto bad = optimality_violations(mdp, sol.policy().with_action(0, root, adm[slot]), 0);
    REQUIRE(bad.size() == 1);
    CHECK(bad[0].t == 0);
    CHECK(bad[0].cell == root);
    CHECK(bad[0].chosen == adm[slot]);
    CHECK(bad[0].gain == doctest::Approx(sol.value(0, root) - q[slot]).epsilon(1e-9));
    ++perturbed;
  }
  CHECK(perturbed >= 10);
}

TEST_CASE("tied alternatives are not violations") {
  // duplicated actions: a1 is a copy of a0 in every stage
  MdpData d;
  d.horizon = 2;
  d.num_states = 2;
  d.num_actions = 2;
  d.lambda = 1.0;
  d.admissible = {{0, 1}, {0, 1}};
  for (int t = 0; t < 2; ++t) {
    KernelStage st;
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a) {
        st.rows.push_back({{0, 0.5}, {1, 0.5}});
        st.reward.push_back(s == 0 ? 1.0 : -0.5);
      }
    d.stages.emplace_back(st);
  }
  const TabularMdp mdp(d);
  const auto sol = backward_induction(mdp, 0, 0.5);
  const std::size_t root = sol.root_cell(0);
  CHECK(sol.tie_count(0, root) == 2);
  const int other = 1 - sol.action(0, root);
  CHECK(optimality_violations(mdp, sol.policy().with_action(0, root, other), 0).empty());
}

TEST_CASE("converged solver policy admits no first-order improvement") {
  std::mt19937_64 rng(8);
  int checked = 0;
  for (int i = 0; i < 40; ++i) {
    const auto mdp = build_random(500 + i, helpers::small_sizes(rng, 1.0));
    SolveOptions o;
    o.eps_fix = 1e-13;
    const auto rep = solve(mdp, 0, o);
    if (!rep.converged()) continue;
    const HistoryPolicyView u(rep.policy);
    for (int j = 0; j < 5; ++j) {
      const HistoryPolicyView v(helpers::random_policy(mdp, 0, rep.y_star, rng()));
      const auto pair = build_chain_pair(mdp, u, v, 0);
      CHECK(performance_derivative(pair.u, pair.v) <= 1e-8);
      ++checked;
    }
  }
  CHECK(checked >= 150);
}
