#pragma once

// Successor lookup between consecutive lattice stages.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "mvmdp/lattice.hpp"
#include "mvmdp/mdp.hpp"

namespace mvmdp::detail {

struct Succ {
  double prob;
  double reward;
  int state;
  int pos;            // position of state in stage t+1, -1 when absent
  std::int64_t dk;    // reward in quanta (integral/quantized modes)
  std::size_t index;  // outcome index within the pair
};

class StageStep {
 public:
  StageStep(const TabularMdp& mdp, const LatticeShape& shape, int t)
      : mdp_(mdp), shape_(shape), t_(t), cur_(shape.stages[t]), nxt_(shape.stages[t + 1]) {}

  void outcomes(std::size_t pr, std::vector<Succ>& out) const {
    out.clear();
    mdp_.for_each_outcome(t_, pr, [&](std::size_t idx, double p, int next, double r) {
      const int pos = next < static_cast<int>(nxt_.state_pos.size()) ? nxt_.state_pos[next] : -1;
      Succ o{p, r, next, pos, 0, idx};
      if (shape_.mode != LatticeMode::sparse) o.dk = std::llround(r / shape_.quantum);
      out.push_back(o);
    });
  }

  // Offset index at t+1 reached from offset index i at t.
  std::optional<std::size_t> next_index(std::size_t i, const Succ& o) const {
    switch (shape_.mode) {
      case LatticeMode::integral:
        return nxt_.index_of_n(cur_.ns[i] - o.dk);
      case LatticeMode::quantized:
        return shape_.locate(t_ + 1, cur_.offsets[i] - o.reward);
      case LatticeMode::sparse:
        return nxt_.index_of_offset(cur_.offsets[i] - o.reward, shape_.tau);
    }
    return std::nullopt;
  }

  std::optional<std::size_t> next_cell(std::size_t i, const Succ& o) const {
    if (o.pos < 0) return std::nullopt;
    auto j = next_index(i, o);
    if (!j) return std::nullopt;
    return static_cast<std::size_t>(o.pos) * nxt_.num_ys() + *j;
  }

  double snap_distance(std::size_t i, const Succ& o, std::size_t j) const {
    return std::abs(cur_.offsets[i] - o.reward - nxt_.offsets[j]);
  }

  // Constant index shift i -> i + shift when both stages are contiguous integer grids.
  bool uniform_shift() const {
    return shape_.mode == LatticeMode::integral && cur_.contiguous && nxt_.contiguous;
  }
  std::int64_t shift(std::int64_t dk) const { return cur_.ns.front() - dk - nxt_.ns.front(); }

  const StageGrid& cur() const { return cur_; }
  const StageGrid& nxt() const { return nxt_; }

 private:
  const TabularMdp& mdp_;
  const LatticeShape& shape_;
  int t_;
  const StageGrid& cur_;
  const StageGrid& nxt_;
};

inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t terminal_hash(int horizon, int s) {
  return splitmix(splitmix(0x5eedULL + static_cast<std::uint64_t>(horizon)) ^ static_cast<std::uint64_t>(s));
}

inline std::uint64_t outcome_hash(std::size_t o, std::uint64_t child) {
  return splitmix(child ^ (0xa24baed4963ee407ULL * (o + 1)));
}

inline std::uint64_t cell_hash(int t, int s, int a, std::uint64_t children) {
  std::uint64_t h = splitmix(static_cast<std::uint64_t>(t) * 0x100000001b3ULL + 17);
  h = splitmix(h ^ static_cast<std::uint64_t>(s));
  h = splitmix(h ^ (static_cast<std::uint64_t>(a) << 32));
  return splitmix(h ^ children);
}

}  // namespace mvmdp::detail
