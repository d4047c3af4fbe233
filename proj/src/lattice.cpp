#include "mvmdp/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mvmdp/error.hpp"

namespace mvmdp {

std::optional<std::size_t> StageGrid::index_of_n(std::int64_t n) const {
  if (ns.empty()) return std::nullopt;
  if (contiguous) {
    if (n < ns.front() || n > ns.back()) return std::nullopt;
    return static_cast<std::size_t>(n - ns.front());
  }
  auto it = std::lower_bound(ns.begin(), ns.end(), n);
  if (it == ns.end() || *it != n) return std::nullopt;
  return static_cast<std::size_t>(it - ns.begin());
}

std::optional<std::size_t> StageGrid::index_of_offset(double off, double tau) const {
  auto it = std::lower_bound(offsets.begin(), offsets.end(), off - tau);
  if (it == offsets.end() || *it > off + tau) return std::nullopt;
  return static_cast<std::size_t>(it - offsets.begin());
}

std::optional<std::size_t> LatticeShape::locate(int t, double off) const {
  const StageGrid& g = stages[t];
  switch (mode) {
    case LatticeMode::integral: {
      const double x = off / quantum;
      const double r = std::round(x);
      if (std::abs(x - r) * quantum > tau) return std::nullopt;
      return g.index_of_n(static_cast<std::int64_t>(r));
    }
    case LatticeMode::quantized: {
      if (g.ns.empty()) return std::nullopt;
      auto n = static_cast<std::int64_t>(std::llround(off / quantum));
      n = std::clamp(n, g.ns.front(), g.ns.back());
      return static_cast<std::size_t>(n - g.ns.front());
    }
    case LatticeMode::sparse:
      return g.index_of_offset(off, tau);
  }
  return std::nullopt;
}

std::optional<std::size_t> YLattice::cell(int t, int s, double y) const {
  const StageGrid& g = stage(t);
  if (s < 0 || s >= static_cast<int>(g.state_pos.size()) || g.state_pos[s] < 0) return std::nullopt;
  auto i = shape_->locate(t, y - base_);
  if (!i) return std::nullopt;
  return static_cast<std::size_t>(g.state_pos[s]) * g.num_ys() + *i;
}

namespace {

double fgcd(double a, double b, double tol) {
  if (a < b) std::swap(a, b);
  while (b > tol) {
    double r = std::fmod(a, b);
    if (b - r <= tol) r = 0.0;
    a = b;
    b = r;
  }
  return a;
}

void dedup_sorted(std::vector<double>& v, double tau) {
  std::size_t w = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (w == 0 || v[i] - v[w - 1] > tau) v[w++] = v[i];
  v.resize(w);
}

struct Reach {
  std::vector<std::vector<int>> states;        // per stage 0..T
  std::vector<std::vector<double>> rewards;    // per stage 0..T-1, sorted, deduplicated
};

Reach forward_reach(const TabularMdp& mdp, const std::vector<int>& initial, double tau) {
  const int T = mdp.horizon();
  Reach r;
  std::vector<char> cur(mdp.num_states(), 0);
  for (int s : initial) {
    if (s < 0 || s >= mdp.num_states()) throw ConfigError("initial state " + std::to_string(s) + " outside S");
    cur[s] = 1;
  }
  for (int t = 0; t <= T; ++t) {
    std::vector<int> st;
    for (int s = 0; s < mdp.num_states(); ++s)
      if (cur[s]) st.push_back(s);
    r.states.push_back(st);
    if (t == T) break;
    std::vector<char> nxt(mdp.num_states(), 0);
    std::vector<double> rew;
    for (int s : st)
      for (std::size_t k = 0; k < mdp.admissible(s).size(); ++k)
        mdp.for_each_outcome(t, mdp.pair(s, static_cast<int>(k)), [&](std::size_t, double p, int next, double rr) {
          if (p <= 0) return;
          nxt[next] = 1;
          rew.push_back(rr);
        });
    std::sort(rew.begin(), rew.end());
    dedup_sorted(rew, tau);
    r.rewards.push_back(std::move(rew));
    cur.swap(nxt);
  }
  return r;
}

void fill_states(StageGrid& g, const std::vector<int>& states, int num_states) {
  g.states = states;
  g.state_pos.assign(num_states, -1);
  for (std::size_t i = 0; i < states.size(); ++i) g.state_pos[states[i]] = static_cast<int>(i);
}

void check_cap(std::size_t total, const LatticeOptions& opts) {
  if (total > opts.cell_cap)
    throw LatticeExplosion("pseudo-mean lattice exceeds " + std::to_string(opts.cell_cap) +
                           " cells; enable quantization (quantized_backward_induction / --quantize)");
}

// Integer Minkowski difference {n - k}.
std::vector<std::int64_t> minkowski(const std::vector<std::int64_t>& ns, bool ns_contig,
                                    const std::vector<std::int64_t>& ks) {
  const std::int64_t lo = ns.front() - ks.back(), hi = ns.back() - ks.front();
  bool ks_contig = ks.back() - ks.front() + 1 == static_cast<std::int64_t>(ks.size());
  std::vector<std::int64_t> out;
  if (ns_contig && ks_contig) {
    out.reserve(static_cast<std::size_t>(hi - lo + 1));
    for (std::int64_t n = lo; n <= hi; ++n) out.push_back(n);
    return out;
  }
  std::vector<char> mark(static_cast<std::size_t>(hi - lo + 1), 0);
  for (std::int64_t n : ns)
    for (std::int64_t k : ks) mark[static_cast<std::size_t>(n - k - lo)] = 1;
  for (std::size_t i = 0; i < mark.size(); ++i)
    if (mark[i]) out.push_back(lo + static_cast<std::int64_t>(i));
  return out;
}

}  // namespace

double common_quantum(const std::vector<double>& values, double tol) {
  double g = 0.0, vmax = 0.0;
  for (double v : values) {
    const double a = std::abs(v);
    vmax = std::max(vmax, a);
    if (a <= tol) continue;
    g = g == 0.0 ? a : fgcd(g, a, tol);
  }
  if (g == 0.0) return 1.0;
  if (vmax / g > 1e8) return 0.0;
  for (double v : values) {
    const double x = v / g;
    if (std::abs(x - std::round(x)) * g > tol * std::max(1.0, std::abs(v))) return 0.0;
  }
  return g;
}

std::shared_ptr<const LatticeShape> build_lattice_shape(const TabularMdp& mdp, const std::vector<int>& initial_states,
                                                        const std::vector<double>& root_offsets,
                                                        const LatticeOptions& opts) {
  if (root_offsets.empty()) throw ConfigError("lattice needs at least one root");
  const int T = mdp.horizon();
  Reach reach = forward_reach(mdp, initial_states, opts.tau);
  auto shape = std::make_shared<LatticeShape>();
  shape->tau = opts.tau;
  shape->stages.resize(T + 1);
  for (int t = 0; t <= T; ++t) fill_states(shape->stages[t], reach.states[t], mdp.num_states());

  double q = 0.0;
  if (opts.allow_integral) {
    std::vector<double> all(root_offsets.begin(), root_offsets.end());
    for (const auto& rs : reach.rewards) all.insert(all.end(), rs.begin(), rs.end());
    q = common_quantum(all, 1e-9);
    if (q > 0) {
      double span = 0.0;
      for (double o : root_offsets) span = std::max(span, std::abs(o));
      for (const auto& rs : reach.rewards)
        if (!rs.empty()) span += std::max(std::abs(rs.front()), std::abs(rs.back()));
      if (span / q > 1e8) q = 0.0;
    }
  }

  std::size_t total = 0;
  if (q > 0) {
    shape->mode = LatticeMode::integral;
    shape->quantum = q;
    std::vector<std::int64_t> ns;
    for (double o : root_offsets) ns.push_back(std::llround(o / q));
    std::sort(ns.begin(), ns.end());
    ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
    for (int t = 0; t <= T; ++t) {
      StageGrid& g = shape->stages[t];
      g.ns = ns;
      g.contiguous = ns.back() - ns.front() + 1 == static_cast<std::int64_t>(ns.size());
      g.offsets.resize(ns.size());
      for (std::size_t i = 0; i < ns.size(); ++i) g.offsets[i] = q * static_cast<double>(ns[i]);
      total += g.cells();
      check_cap(total, opts);
      if (t == T) break;
      std::vector<std::int64_t> ks;
      for (double r : reach.rewards[t]) ks.push_back(std::llround(r / q));
      std::sort(ks.begin(), ks.end());
      ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
      if (ks.empty()) ks.push_back(0);
      const double width = static_cast<double>(ns.back() - ns.front() + ks.back() - ks.front() + 1);
      if (width * static_cast<double>(reach.states[t + 1].size()) > 4.0 * static_cast<double>(opts.cell_cap))
        check_cap(opts.cell_cap + 1, opts);
      ns = minkowski(ns, g.contiguous, ks);
    }
  } else {
    shape->mode = LatticeMode::sparse;
    std::vector<double> offs(root_offsets.begin(), root_offsets.end());
    std::sort(offs.begin(), offs.end());
    dedup_sorted(offs, opts.tau);
    for (int t = 0; t <= T; ++t) {
      StageGrid& g = shape->stages[t];
      g.offsets = offs;
      total += g.cells();
      check_cap(total, opts);
      if (t == T) break;
      const auto& rs = reach.rewards[t];
      if (static_cast<double>(offs.size()) * static_cast<double>(rs.size()) > 4.0 * static_cast<double>(opts.cell_cap))
        check_cap(opts.cell_cap + 1, opts);
      std::vector<double> next;
      next.reserve(offs.size() * rs.size());
      for (double o : offs)
        for (double r : rs) next.push_back(o - r);
      std::sort(next.begin(), next.end());
      dedup_sorted(next, opts.tau);
      offs.swap(next);
    }
  }
  shape->total_cells = total;
  return shape;
}

std::shared_ptr<const LatticeShape> build_quantized_shape(const TabularMdp& mdp, const std::vector<int>& initial_states,
                                                          double offset_lo, double offset_hi, double dy,
                                                          const LatticeOptions& opts) {
  if (!(dy > 0)) throw ConfigError("quantization step must be positive");
  const int T = mdp.horizon();
  Reach reach = forward_reach(mdp, initial_states, opts.tau);
  auto shape = std::make_shared<LatticeShape>();
  shape->mode = LatticeMode::quantized;
  shape->quantum = dy;
  shape->tau = opts.tau;
  shape->stages.resize(T + 1);
  std::int64_t lo = std::llround(offset_lo / dy), hi = std::llround(offset_hi / dy);
  std::size_t total = 0;
  for (int t = 0; t <= T; ++t) {
    StageGrid& g = shape->stages[t];
    fill_states(g, reach.states[t], mdp.num_states());
    g.contiguous = true;
    for (std::int64_t n = lo; n <= hi; ++n) {
      g.ns.push_back(n);
      g.offsets.push_back(dy * static_cast<double>(n));
    }
    total += g.cells();
    check_cap(total, opts);
    if (t == T) break;
    const auto& rs = reach.rewards[t];
    if (!rs.empty()) {
      lo -= static_cast<std::int64_t>(std::ceil(rs.back() / dy - 1e-9));
      hi -= static_cast<std::int64_t>(std::floor(rs.front() / dy + 1e-9));
    }
  }
  shape->total_cells = total;
  return shape;
}

YLattice reachable_lattice(const TabularMdp& mdp, int s0, double y0, const LatticeOptions& opts) {
  return YLattice(build_lattice_shape(mdp, {s0}, {0.0}, opts), y0);
}

}  // namespace mvmdp
