#pragma once

#include <cstdint>
#include <vector>

#include "mvmdp/mdp.hpp"
#include "mvmdp/parallel.hpp"
#include "mvmdp/policy.hpp"
#include "mvmdp/rng.hpp"

namespace mvmdp {

struct TerminalEntry {
  int state;
  double rho;   // accumulated reward R = y0 - y_T
  double mass;
};

struct TerminalDistribution {
  int s0 = 0;
  double y0 = 0.0;
  std::vector<TerminalEntry> entries;  // sorted by (state, rho)

  double y(const TerminalEntry& e) const { return y0 - e.rho; }
  double total_mass() const;
};

struct EvalResult {
  double y0 = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double second_moment = 0.0;
  double mv = 0.0;         // J = mean - lambda variance
  double pseudo_mv = 0.0;  // E[R - lambda (R - y0)^2]
};

TerminalDistribution forward_distribution(const TabularMdp& mdp, const AugmentedPolicy& policy, int s0, double y0);
TerminalDistribution forward_distribution(const TabularMdp& mdp, const HistoryPolicyView& view, int s0, double y0);

EvalResult summarize(const TerminalDistribution& dist, double lambda);
EvalResult evaluate(const TabularMdp& mdp, const AugmentedPolicy& policy, int s0, double y0);
EvalResult evaluate(const TabularMdp& mdp, const HistoryPolicyView& view, int s0, double y0);

// Pseudo mean-variance is reported at y0 (defaults to the first component's root).
EvalResult evaluate_mixed(const TabularMdp& mdp, const MixedPolicy& mix, int s0);
EvalResult evaluate_mixed(const TabularMdp& mdp, const MixedPolicy& mix, int s0, double y0);

struct PathRecord {
  std::vector<int> states;
  std::vector<int> actions;
  std::vector<double> rewards;
  double total = 0.0;
};

// One trajectory; the rng supplies exactly one uniform per stage.
PathRecord sample_path(const TabularMdp& mdp, const HistoryPolicyView& view, int s0, CounterRng& rng);
// Same draw protocol, walking lattice cells of the augmented chain instead of histories.
PathRecord sample_augmented_path(const TabularMdp& mdp, const AugmentedPolicy& policy, int s0, CounterRng& rng);

struct SimulationResult {
  std::size_t paths = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double se_mean = 0.0;
  double se_variance = 0.0;
  double ci_mean = 0.0;  // 95% half-widths
  double ci_variance = 0.0;
};

SimulationResult summarize_samples(const std::vector<double>& samples);
SimulationResult simulate(const TabularMdp& mdp, const HistoryPolicyView& view, int s0, std::size_t n_paths,
                          std::uint64_t seed, int threads = default_threads());
SimulationResult simulate(const TabularMdp& mdp, const AugmentedPolicy& policy, int s0, double y0,
                          std::size_t n_paths, std::uint64_t seed, int threads = default_threads());

}  // namespace mvmdp
