#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mvmdp/augmented_dp.hpp"
#include "mvmdp/lattice.hpp"
#include "mvmdp/mdp.hpp"
#include "mvmdp/policy.hpp"
#include "mvmdp/policy_eval.hpp"

namespace mvmdp {

struct SolveOptions {
  int max_iters = 100;
  double eps_fix = 1e-7;
  double eps_tie = 1e-9;
  std::optional<double> y0_init;     // default: mean of the myopic policy
  bool break_point_escape = true;
  std::size_t escape_candidates = 10000;
  std::optional<double> quantize;    // pseudo-mean grid step; exact lattice when empty
  LatticeOptions lattice;
  int threads = default_threads();
  std::shared_ptr<const LatticeShape> shape;  // reuse a lattice built for this s0
};

enum class SolveStatus { converged, max_iters, break_point_escaped_then_converged, cycle_detected };
std::string to_string(SolveStatus s);

struct IterateRecord {
  int k = 0;
  double y = 0.0;       // y^(k)
  double J = 0.0;       // J of the policy improved at y^(k)
  double J_hat = 0.0;   // V*_0(s0, y^(k))
  double mean = 0.0;    // y^(k+1)
  std::uint64_t fingerprint = 0;
};

struct BreakPointEvent {
  int iteration = 0;
  std::size_t tied_cells = 0;
  std::size_t candidates = 0;
  bool improved = false;
  double gain = 0.0;
};

struct SolveReport {
  int s0 = 0;
  double y0_init = 0.0;
  std::vector<IterateRecord> trace;
  SolveStatus status = SolveStatus::max_iters;
  bool has_policy = false;
  AugmentedPolicy policy;  // rooted at y_star
  double y_star = 0.0;
  EvalResult eval;         // of the final policy at y_star
  std::vector<BreakPointEvent> events;
  double wall_seconds = 0.0;

  bool converged() const {
    return status == SolveStatus::converged || status == SolveStatus::break_point_escaped_then_converged;
  }
};

SolveReport solve(const TabularMdp& mdp, int s0, const SolveOptions& opts = {});

struct MultiStartReport {
  std::vector<SolveReport> runs;
  std::size_t best = 0;
  std::vector<double> distinct_optima;  // distinct converged y*
  bool disagreement = false;
};

MultiStartReport solve_multi_start(const TabularMdp& mdp, int s0, const std::vector<double>& y0_inits,
                                   const SolveOptions& opts = {});

struct LinearFit {
  double x_a = 0.0, y_a = 0.0, x_b = 0.0, y_b = 0.0;
  double slope = 0.0, intercept = 0.0;
  double x_target = 0.0, predicted = 0.0;
};

// y* = k1 x + k0 through two points, with x the physical state value (metadata) of each s0.
LinearFit fit_linear_structure(const TabularMdp& mdp, int s0_a, double y_a, int s0_b, double y_b, int target_s0);
LinearFit linear_structure_extrapolate(const TabularMdp& mdp, int s0_a, int s0_b, int target_s0,
                                       const SolveOptions& opts = {});

// Mean of the myopic policy from s0.
double default_y0_init(const TabularMdp& mdp, int s0);

// Expected remaining reward under the policy for every lattice cell, per stage (terminal = 0).
std::vector<std::vector<double>> mean_to_go(const TabularMdp& mdp, const AugmentedPolicy& policy);
// Reach probability of each cell from (s0, root): per stage, sorted (cell, mass) pairs.
std::vector<std::vector<std::pair<std::size_t, double>>> occupancy(const TabularMdp& mdp, const AugmentedPolicy& policy,
                                                                   int s0);

}  // namespace mvmdp
