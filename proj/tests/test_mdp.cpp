#include <doctest.h>

#include <cmath>
#include <map>

#include "mvmdp/error.hpp"
#include "mvmdp/mdp.hpp"
#include "mvmdp/model_io.hpp"
#include "mvmdp/models.hpp"
#include "oracles.hpp"

using namespace mvmdp;

namespace {

// Two states, one stage, kernel given explicitly.
MdpData two_state() {
  MdpData d;
  d.horizon = 1;
  d.num_states = 2;
  d.num_actions = 2;
  d.lambda = 1.0;
  d.admissible = {{0, 1}, {0}};
  KernelStage k;
  k.rows = {{{0, 0.5}, {1, 0.5}}, {{1, 1.0}}, {{0, 1.0}}};
  k.reward = {1.0, 2.0, -1.0};
  d.stages.emplace_back(k);
  return d;
}

bool has(const ValidationReport& r, const std::string& needle) {
  for (const auto& v : r.violations)
    if (v.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("validate accepts a well-formed model") {
  CHECK(validate(TabularMdp(two_state())).ok());
}

TEST_CASE("validate reports row mass and empty action sets") {
  MdpData d = two_state();
  std::get<KernelStage>(d.stages[0]).rows[0][1].prob = 0.4;
  auto rep = validate(TabularMdp(d));
  CHECK_FALSE(rep.ok());
  CHECK(has(rep, "stage 0 state 0 action 0: row mass"));

  MdpData e = two_state();
  e.admissible[1].clear();
  std::get<KernelStage>(e.stages[0]).rows.pop_back();
  std::get<KernelStage>(e.stages[0]).reward.pop_back();
  CHECK(has(validate(TabularMdp(e)), "A(1) empty"));
}

TEST_CASE("validate rejects successors outside the state space") {
  MdpData d = two_state();
  std::get<KernelStage>(d.stages[0]).rows[1][0].next = 7;
  CHECK_FALSE(validate(TabularMdp(d)).ok());
}

TEST_CASE("pair indexing follows the admissible lists") {
  TabularMdp m(two_state());
  CHECK(m.num_pairs() == 3);
  CHECK(m.pair(1, 0) == 2);
  CHECK(m.action_slot(0, 1) == 1);
  CHECK(m.action_slot(1, 1) == -1);
  CHECK(m.expected_reward(0, m.pair(0, 1)) == doctest::Approx(2.0));
}

TEST_CASE("pseudo-mean domains of the application models") {
  const auto inv = build_inventory({});
  const Interval di = pseudo_mean_domain(inv);
  CHECK(di.lo == doctest::Approx(-300));
  CHECK(di.hi == doctest::Approx(400));
  CHECK(inv.reward_min() == -30);
  CHECK(inv.reward_max() == 40);

  const auto q = build_queueing({});
  CHECK(q.num_states() == 1001);
  CHECK(q.num_actions() == 101);
  // stored rewards reach -2 - 10 = -12 (full service plus full buffer)
  CHECK(q.reward_min() == doctest::Approx(-12.0));
  CHECK(pseudo_mean_domain(q).lo == doctest::Approx(-48.0));
  CHECK(pseudo_mean_domain(q).hi == doctest::Approx(0.0));
  CHECK(q.meta().linear_convex);
  CHECK(q.meta().state_values[500] == doctest::Approx(5.0));
}

TEST_CASE("inventory admissible sets and a hand-computed stage") {
  const auto m = build_inventory({});
  CHECK(m.admissible(0).size() == 11);
  CHECK(m.admissible(10).size() == 1);
  // s = 3, a = 2: post 5, each demand 0..10 with prob 1/11
  double mean = 0.0;
  std::map<int, double> next;
  m.for_each_outcome(0, m.pair(3, 2), [&](std::size_t, double p, int s2, double r) {
    mean += p * r;
    next[s2] += p;
  });
  double expect = 0.0;
  for (int xi = 0; xi <= 10; ++xi)
    expect += (4.0 * xi - 2.0 * 2 - std::max(5 - xi, 0) - 3.0 * std::max(xi - 5, 0)) / 11.0;
  CHECK(mean == doctest::Approx(expect).epsilon(1e-12));
  CHECK(next[0] == doctest::Approx(6.0 / 11));
  CHECK(next[5] == doctest::Approx(1.0 / 11));
}

TEST_CASE("inventory parameter checks") {
  InventoryParams p;
  p.shortage_cost = 1;
  CHECK_THROWS_AS(build_inventory(p), ConfigError);
}

TEST_CASE("noise-explicit stages marginalize to stochastic rows") {
  const auto m = build_queueing({});
  for (int s : {0, 3, 500, 1000})
    for (int k : {0, 7, 100}) {
      const auto row = m.marginal_row(1, m.pair(s, k));
      double mass = 0.0;
      for (std::size_t i = 0; i < row.size(); ++i) {
        mass += row[i].prob;
        if (i) CHECK(row[i].next > row[i - 1].next);
      }
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    }
  // s = 500, serve 0.3: post 0.2, arrivals in {0, 0.01, ..., 1} -> 101 next states
  const auto row = m.marginal_row(0, m.pair(500, 30));
  CHECK(row.size() == 101);
  CHECK(row.front().next == 470);
  CHECK(row.front().prob == doctest::Approx(0.5));
  CHECK(row[1].prob == doctest::Approx(0.005));
}

TEST_CASE("queueing rewards") {
  const auto m = build_queueing({});
  // s = 2.0, serve 0.5: operating -1.0, then holding on the next workload
  double er = 0.0;
  m.for_each_outcome(0, m.pair(200, 50), [&](std::size_t, double p, int s2, double r) {
    CHECK(r == doctest::Approx(-1.0 - 0.01 * s2));
    er += p * r;
  });
  // next = 1.5 + arrival, arrival 0 w.p. 0.5 else uniform on {0.01..1}
  double expect = 0.5 * (-1.0 - 1.5);
  for (int k = 1; k <= 100; ++k) expect += 0.005 * (-1.0 - (1.5 + 0.01 * k));
  CHECK(er == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("model documents round trip") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    RandomSizes z;
    z.num_states = 3;
    z.num_actions = 2;
    z.horizon = 3;
    z.random_admissible = true;
    const auto m = build_random(seed, z);
    const auto j = model_to_json(m);
    CHECK(model_to_json(model_from_json(j)) == j);
  }
  const auto inv = build_inventory({3, 3, 4, 2, 1, 3, 2.0});
  const auto j = model_to_json(inv);
  CHECK(j["schema"] == kModelSchema);
  CHECK(model_to_json(model_from_json(j)) == j);
  const auto noise = oracle::random_noise_model(5, 3, 2, 2, 3, 1.0);
  CHECK(model_to_json(model_from_json(model_to_json(noise))) == model_to_json(noise));
}

TEST_CASE("decimal strings are accepted and bad documents rejected") {
  auto j = model_to_json(TabularMdp(two_state()));
  j["lambda"] = "0.25";
  j["stages"][0]["kernel"][0][0][1] = "0.5";
  const auto m = model_from_json(j);
  CHECK(m.lambda() == 0.25);
  CHECK(validate(m).ok());

  auto bad = j;
  bad["lambda"] = "0.25x";
  CHECK_THROWS_AS(model_from_json(bad), ModelError);
  bad = j;
  bad.erase("horizon");
  CHECK_THROWS_AS(model_from_json(bad), ModelError);
  bad = j;
  bad["schema"] = "other/2";
  CHECK_THROWS_AS(model_from_json(bad), ModelError);
}

TEST_CASE("random models are reproducible from the seed") {
  RandomSizes z;
  z.num_states = 3;
  z.num_actions = 3;
  z.horizon = 3;
  CHECK(model_to_json(build_random(9, z)) == model_to_json(build_random(9, z)));
  CHECK(model_to_json(build_random(9, z)) != model_to_json(build_random(10, z)));
  CHECK(validate(build_random(9, z)).ok());
  z.max_cells = 10;
  CHECK_THROWS_AS(build_random(9, z), ConfigError);
}

TEST_CASE("myopic policy mean on a hand model") {
  TabularMdp m(two_state());
  const auto pol = myopic_policy(m);
  CHECK(pol[0][0] == 1);
  CHECK(markov_policy_mean(m, pol, 0) == doctest::Approx(2.0));
  CHECK(markov_policy_mean(m, pol, 1) == doctest::Approx(-1.0));
}

TEST_CASE("reachable domain is no wider than the stored one") {
  const auto m = build_inventory({});
  const Interval r = reachable_pseudo_mean_domain(m, 10);
  CHECK(r.lo >= -300);
  CHECK(r.hi <= 400);
}
