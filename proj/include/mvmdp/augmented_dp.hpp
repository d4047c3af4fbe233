#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "mvmdp/lattice.hpp"
#include "mvmdp/mdp.hpp"
#include "mvmdp/parallel.hpp"
#include "mvmdp/policy.hpp"

namespace mvmdp {

struct InnerOptions {
  double eps_tie = 1e-9;
  const AugmentedPolicy* incumbent = nullptr;  // preferred among tied actions
  bool fingerprints = true;
  bool keep_tables = true;  // false keeps only the stage-0 tables
  int threads = default_threads();
};

// Value, action, tie and fingerprint tables of the inner pseudo mean-variance problem.
// Stage t tables are indexed by lattice cell; the terminal stage holds V = -lambda y^2.
class AugmentedSolution {
 public:
  const YLattice& lattice() const { return lattice_; }
  int horizon() const { return lattice_.horizon(); }
  double eps_tie() const { return eps_tie_; }

  bool has_stage(int t) const { return !value_[t].empty(); }
  double value(int t, std::size_t cell) const { return value_[t][cell]; }
  int action(int t, std::size_t cell) const { return (*actions_)[t][cell]; }
  int tie_count(int t, std::size_t cell) const { return ties_[t][cell]; }
  bool has_fingerprints() const { return !hash_.empty() && !hash_[0].empty(); }
  std::uint64_t fingerprint(int t, std::size_t cell) const { return hash_[t][cell]; }
  const std::vector<double>& values(int t) const { return value_[t]; }

  // V*_0(s0, base) and the root fingerprint.
  double root_value(int s0) const;
  std::uint64_t root_fingerprint(int s0) const;
  std::size_t root_cell(int s0) const;

  AugmentedPolicy policy() const { return AugmentedPolicy(lattice_, actions_); }

  // Q_t(s,y,a) for every admissible action of the cell's state (requires stage t+1 tables).
  std::vector<double> q_values(const TabularMdp& mdp, int t, std::size_t cell) const;
  std::vector<int> tied_actions(const TabularMdp& mdp, int t, std::size_t cell) const;

  // Largest distance between an exact successor and its grid point (quantized mode), else 0.
  double max_snap_distance() const { return max_snap_; }

 private:
  friend AugmentedSolution solve_on_lattice(const TabularMdp&, const YLattice&, const InnerOptions&);
  YLattice lattice_;
  double eps_tie_ = 1e-9;
  std::vector<std::vector<double>> value_;
  std::shared_ptr<ActionTables> actions_;
  std::vector<std::vector<std::uint8_t>> ties_;
  std::vector<std::vector<std::uint64_t>> hash_;
  double max_snap_ = 0.0;
};

AugmentedSolution solve_on_lattice(const TabularMdp& mdp, const YLattice& lattice, const InnerOptions& opts = {});

AugmentedSolution backward_induction(const TabularMdp& mdp, int s0, double y0, const InnerOptions& opts = {},
                                     const LatticeOptions& lattice_opts = {});

// Snaps pseudo means to the grid y0 - k dy; the grid covers every reachable accumulated reward.
AugmentedSolution quantized_backward_induction(const TabularMdp& mdp, int s0, double y0, double dy,
                                               const InnerOptions& opts = {}, const LatticeOptions& lattice_opts = {});

}  // namespace mvmdp
