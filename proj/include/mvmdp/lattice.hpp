#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "mvmdp/mdp.hpp"

namespace mvmdp {

// integral: offsets are quantum * n with integer n and the rewards are multiples of quantum.
// sparse: explicit float offsets deduplicated at tau.
// quantized: uniform grid of step quantum; lookups snap to the nearest point.
enum class LatticeMode { integral, sparse, quantized };

// Reachable states and pseudo-mean offsets of one stage.  A cell is (state position, offset index)
// with id pos * num_ys() + i.
struct StageGrid {
  std::vector<int> states;
  std::vector<int> state_pos;  // per state index, -1 when unreachable
  std::vector<double> offsets;  // ascending
  std::vector<std::int64_t> ns;  // integral and quantized modes
  bool contiguous = false;

  std::size_t num_states() const { return states.size(); }
  std::size_t num_ys() const { return offsets.size(); }
  std::size_t cells() const { return states.size() * offsets.size(); }
  std::optional<std::size_t> index_of_n(std::int64_t n) const;
  std::optional<std::size_t> index_of_offset(double off, double tau) const;
};

struct LatticeShape {
  LatticeMode mode = LatticeMode::sparse;
  double quantum = 0.0;
  double tau = 1e-9;
  std::vector<StageGrid> stages;  // horizon + 1 entries
  std::size_t total_cells = 0;

  // Index of the stage-t offset matching off: exact within tau, or nearest in quantized mode.
  std::optional<std::size_t> locate(int t, double off) const;
};

// Pseudo-mean lattice: y = base + offset.  Offsets do not depend on the root, so one shape
// serves every root y0 for a given s0.
class YLattice {
 public:
  YLattice() = default;
  YLattice(std::shared_ptr<const LatticeShape> shape, double base) : shape_(std::move(shape)), base_(base) {}

  double base() const { return base_; }
  const LatticeShape& shape() const { return *shape_; }
  const std::shared_ptr<const LatticeShape>& shape_ptr() const { return shape_; }
  const StageGrid& stage(int t) const { return shape_->stages[t]; }
  int horizon() const { return static_cast<int>(shape_->stages.size()) - 1; }
  double y(int t, std::size_t i) const { return base_ + shape_->stages[t].offsets[i]; }
  std::optional<std::size_t> cell(int t, int s, double y) const;
  YLattice rebased(double y0) const { return YLattice(shape_, y0); }

 private:
  std::shared_ptr<const LatticeShape> shape_;
  double base_ = 0.0;
};

struct LatticeOptions {
  std::size_t cell_cap = 50'000'000;
  double tau = 1e-9;
  bool allow_integral = true;
};

// Forward closure from the given stage-0 states and root offsets under every admissible action
// and every positive-probability outcome.  Chooses integral mode when rewards and root offsets
// share a common quantum.
std::shared_ptr<const LatticeShape> build_lattice_shape(const TabularMdp& mdp, const std::vector<int>& initial_states,
                                                        const std::vector<double>& root_offsets,
                                                        const LatticeOptions& opts = {});
std::shared_ptr<const LatticeShape> build_quantized_shape(const TabularMdp& mdp, const std::vector<int>& initial_states,
                                                          double offset_lo, double offset_hi, double dy,
                                                          const LatticeOptions& opts = {});

YLattice reachable_lattice(const TabularMdp& mdp, int s0, double y0, const LatticeOptions& opts = {});

// Largest g with every value an integer multiple of g (within tolerance), or 0 if none is usable.
double common_quantum(const std::vector<double>& values, double tol = 1e-9);

}  // namespace mvmdp
