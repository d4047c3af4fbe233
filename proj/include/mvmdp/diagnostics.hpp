#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mvmdp/mdp.hpp"
#include "mvmdp/policy.hpp"

namespace mvmdp {

struct ChainCell {
  int state = 0;
  double rho = 0.0;  // accumulated reward
};

// Policy-induced chain over augmented cells (s, rho), one block per stage.  Cells where the policy
// is undefined carry a zero-reward self-loop.  The terminal reward is -lambda (y_ref - rho)^2.
struct StagewiseChain {
  int s0 = 0;
  double y0 = 0.0;     // root of the policy view
  double y_ref = 0.0;  // pseudo mean of the terminal reward
  double lambda = 0.0;
  std::vector<std::vector<ChainCell>> cells;                       // T+1 stages
  std::vector<std::vector<int>> actions;                           // T stages, -1 = padded
  std::vector<Eigen::SparseMatrix<double, Eigen::RowMajor>> P;     // T stages
  std::vector<Eigen::VectorXd> r;                                  // T+1 (r[T] terminal)
  std::vector<Eigen::VectorXd> g;                                  // value to go, T+1

  int horizon() const { return static_cast<int>(P.size()); }
  // d_t, the distribution over stage-t cells started from the root.
  std::vector<Eigen::VectorXd> occupancy() const;
  // Expected accumulated reward.
  double mean() const;
  // E[R - lambda (R - y_ref)^2].
  double pseudo_value() const { return g[0](0); }
};

// Resets the terminal reward at y_ref and recomputes g from its defining sum.
void set_reference(StagewiseChain& chain, double y_ref);

// Single chain with y_ref at its own mean.
StagewiseChain build_chain(const TabularMdp& mdp, const HistoryPolicyView& u, int s0);

struct ChainPair {
  StagewiseChain u;
  StagewiseChain v;
};

// Both chains on the union of cells reachable under either policy; y_ref = mean of u for both.
ChainPair build_chain_pair(const TabularMdp& mdp, const HistoryPolicyView& u, const HistoryPolicyView& v, int s0);

// max |g_t - r_t - P_t g_{t+1}|
double g_recursion_residual(const StagewiseChain& chain);

// J(v) - J(u) from the u-chain value to go and the v-chain occupancy.
double performance_difference(const StagewiseChain& u, const StagewiseChain& v);
// dJ/d delta at 0 for the kernel-level mixture (1 - delta) u + delta v.
double performance_derivative(const StagewiseChain& u, const StagewiseChain& v);

struct FiniteDifference {
  double coarse = 0.0;      // centered, delta = 1e-4
  double fine = 0.0;        // centered, delta = 1e-5
  double richardson = 0.0;  // (100 fine - coarse) / 99
};

FiniteDifference kernel_finite_difference(const TabularMdp& mdp, const HistoryPolicyView& u,
                                          const HistoryPolicyView& v, int s0);

struct OptimalityViolation {
  int t = 0;
  int state = 0;
  double y = 0.0;
  std::size_t cell = 0;
  int chosen = 0;
  int better = 0;
  double gain = 0.0;
};

// Cells reachable from the root where some action beats the chosen one by more than eps_tie,
// judged with the policy's own value to go.
std::vector<OptimalityViolation> optimality_violations(const TabularMdp& mdp, const AugmentedPolicy& policy, int s0,
                                                       double eps_tie = 1e-9);

struct DiagnoseReport {
  double difference_formula = 0.0;
  double direct_difference = 0.0;
  double derivative_formula = 0.0;
  FiniteDifference finite_difference;
  double g_residual = 0.0;
  std::size_t cells = 0;
};

DiagnoseReport diagnose(const TabularMdp& mdp, const HistoryPolicyView& u, const HistoryPolicyView& v, int s0);

}  // namespace mvmdp
