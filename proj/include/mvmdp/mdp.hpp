#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace mvmdp {

struct KernelEntry {
  int next;
  double prob;
};

// Stage given by a Markov kernel and a deterministic reward r_t(s,a).
// Rows and rewards are indexed by admissible pair (see TabularMdp::pair).
struct KernelStage {
  std::vector<std::vector<KernelEntry>> rows;
  std::vector<double> reward;
};

// One noise outcome of a post-decision stage.  next/reward are indexed by post state.
struct NoiseAtom {
  double prob = 0.0;
  std::vector<int> next;
  std::vector<double> reward;
};

// Noise-explicit stage: a pair (s,a) moves to post state m with reward c, then
// atom j moves m to next[m] with reward reward[m].  Total one-step reward is c + reward[m].
struct NoiseStage {
  int num_post = 0;
  std::vector<int> post;
  std::vector<double> decision_reward;
  std::vector<NoiseAtom> atoms;
};

using Stage = std::variant<KernelStage, NoiseStage>;

struct ModelMetadata {
  std::string name;
  std::vector<double> state_values;  // physical value of each state index (optional)
  bool linear_convex = false;        // model satisfies the conditions for linear y*(s0)
};

struct MdpData {
  int horizon = 0;
  int num_states = 0;
  int num_actions = 0;
  std::vector<std::vector<int>> admissible;
  std::vector<Stage> stages;
  double lambda = 0.0;
  ModelMetadata meta;
};

// Finite-horizon MDP.  Immutable after construction.
class TabularMdp {
 public:
  TabularMdp() = default;
  explicit TabularMdp(MdpData data);

  int horizon() const { return d_.horizon; }
  int num_states() const { return d_.num_states; }
  int num_actions() const { return d_.num_actions; }
  double lambda() const { return d_.lambda; }
  const MdpData& data() const { return d_; }
  const ModelMetadata& meta() const { return d_.meta; }

  std::span<const int> admissible(int s) const { return d_.admissible[s]; }
  std::size_t pair(int s, int k) const { return pair_offset_[s] + k; }
  std::size_t pair_begin(int s) const { return pair_offset_[s]; }
  std::size_t num_pairs() const { return pair_offset_.empty() ? 0 : pair_offset_.back(); }
  // Position of action a in admissible(s), or -1.
  int action_slot(int s, int a) const;

  const Stage& stage(int t) const { return d_.stages[t]; }
  bool noise_stage(int t) const { return std::holds_alternative<NoiseStage>(d_.stages[t]); }

  double reward_min() const { return r_min_; }
  double reward_max() const { return r_max_; }

  // f(outcome index, prob, next state, one-step reward)
  template <class F>
  void for_each_outcome(int t, std::size_t pr, F&& f) const {
    const Stage& st = d_.stages[t];
    if (const auto* k = std::get_if<KernelStage>(&st)) {
      const auto& row = k->rows[pr];
      const double r = k->reward[pr];
      for (std::size_t o = 0; o < row.size(); ++o) f(o, row[o].prob, row[o].next, r);
    } else {
      const auto& n = std::get<NoiseStage>(st);
      const int m = n.post[pr];
      const double c = n.decision_reward[pr];
      for (std::size_t j = 0; j < n.atoms.size(); ++j) {
        const auto& at = n.atoms[j];
        f(j, at.prob, at.next[m], c + at.reward[m]);
      }
    }
  }

  double expected_reward(int t, std::size_t pr) const;
  // Marginal kernel row with duplicate successors merged, sorted by state.
  std::vector<KernelEntry> marginal_row(int t, std::size_t pr) const;

  TabularMdp with_lambda(double lambda) const;

 private:
  MdpData d_;
  std::vector<std::size_t> pair_offset_;
  double r_min_ = 0.0, r_max_ = 0.0;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate(const TabularMdp& mdp);

struct Interval {
  double lo = 0.0, hi = 0.0;
};

// [T r_min, T r_max] from the stored reward bounds.
Interval pseudo_mean_domain(const TabularMdp& mdp);
// Same, restricted to the rewards realizable from states reachable from s0.
Interval reachable_pseudo_mean_domain(const TabularMdp& mdp, int s0);

// Expected-reward-greedy Markov policy: actions[t][s], lowest index on ties.
std::vector<std::vector<int>> myopic_policy(const TabularMdp& mdp);
// Mean total reward of a Markov deterministic policy from s0.
double markov_policy_mean(const TabularMdp& mdp, const std::vector<std::vector<int>>& actions, int s0);

}  // namespace mvmdp
