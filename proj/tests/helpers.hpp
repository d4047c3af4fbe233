#pragma once

#include <memory>
#include <random>

#include "mvmdp/lattice.hpp"
#include "mvmdp/models.hpp"
#include "mvmdp/policy.hpp"

namespace helpers {

// Uniformly random admissible action on every cell of the exact lattice rooted at (s0, y0).
inline mvmdp::AugmentedPolicy random_policy(const mvmdp::TabularMdp& mdp, int s0, double y0, std::uint64_t seed) {
  const mvmdp::YLattice lat = mvmdp::reachable_lattice(mdp, s0, y0);
  std::mt19937_64 rng(seed);
  auto tables = std::make_shared<mvmdp::ActionTables>(mdp.horizon());
  for (int t = 0; t < mdp.horizon(); ++t) {
    const auto& g = lat.stage(t);
    auto& tab = (*tables)[t];
    tab.resize(g.cells());
    for (std::size_t c = 0; c < g.cells(); ++c) {
      const auto adm = mdp.admissible(g.states[c / g.num_ys()]);
      tab[c] = adm[rng() % adm.size()];
    }
  }
  return mvmdp::AugmentedPolicy(lat, tables);
}

inline mvmdp::RandomSizes small_sizes(std::mt19937_64& rng, double lambda = 1.0) {
  mvmdp::RandomSizes z;
  z.num_states = 1 + static_cast<int>(rng() % 3);
  z.num_actions = 1 + static_cast<int>(rng() % 3);
  z.horizon = 1 + static_cast<int>(rng() % 3);
  z.lambda = lambda;
  return z;
}

}  // namespace helpers
