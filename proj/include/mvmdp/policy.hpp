#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include <json.hpp>

#include "mvmdp/lattice.hpp"
#include "mvmdp/mdp.hpp"

namespace mvmdp {

using ActionTables = std::vector<std::vector<std::int32_t>>;  // [t][cell], -1 = undefined

// Deterministic Markov policy on augmented states (s, y) of a lattice.
class AugmentedPolicy {
 public:
  AugmentedPolicy() = default;
  AugmentedPolicy(YLattice lattice, std::shared_ptr<const ActionTables> actions)
      : lattice_(std::move(lattice)), actions_(std::move(actions)) {}

  const YLattice& lattice() const { return lattice_; }
  double root() const { return lattice_.base(); }
  int horizon() const { return static_cast<int>(actions_->size()); }
  const ActionTables& tables() const { return *actions_; }
  bool empty() const { return !actions_; }

  int action_at(int t, std::size_t cell) const { return (*actions_)[t][cell]; }
  std::optional<int> action(int t, int s, double y) const;

  // Copy with one cell changed.
  AugmentedPolicy with_action(int t, std::size_t cell, int a) const;
  // Same action tables viewed from another root (offsets are root-relative).
  AugmentedPolicy rebased(double y0) const { return AugmentedPolicy(lattice_.rebased(y0), actions_); }

 private:
  YLattice lattice_;
  std::shared_ptr<const ActionTables> actions_;
};

// History-dependent policy u_t(h_t) = policy(t, s_t, y0 - accumulated reward).
class HistoryPolicyView {
 public:
  HistoryPolicyView() = default;
  HistoryPolicyView(AugmentedPolicy policy, double y0) : policy_(std::move(policy)), y0_(y0) {}
  explicit HistoryPolicyView(AugmentedPolicy policy) : policy_(std::move(policy)), y0_(policy_.root()) {}

  double y0() const { return y0_; }
  const AugmentedPolicy& policy() const { return policy_; }
  std::optional<int> action(int t, int s, double accumulated) const { return policy_.action(t, s, y0_ - accumulated); }

 private:
  AugmentedPolicy policy_;
  double y0_ = 0.0;
};

enum class MixMode { policy_level, kernel_level };

struct MixedPolicy {
  HistoryPolicyView first;
  HistoryPolicyView second;
  double delta = 0.0;
  MixMode mode = MixMode::policy_level;
};

// Cells reachable from (s0, root) under the policy, per stage.
std::vector<std::vector<std::size_t>> reachable_cells(const TabularMdp& mdp, const AugmentedPolicy& policy, int s0);

// True when both policies choose the same action on every cell reachable under both from s0.
bool same_on_common_support(const TabularMdp& mdp, const AugmentedPolicy& a, const AugmentedPolicy& b, int s0);

// Sparse document {"schema","s0","y0","horizon","cells":[[t,s,y,a],...]} over reachable cells.
nlohmann::json policy_to_json(const TabularMdp& mdp, const AugmentedPolicy& policy, int s0);
AugmentedPolicy policy_from_json(const nlohmann::json& doc);

}  // namespace mvmdp
