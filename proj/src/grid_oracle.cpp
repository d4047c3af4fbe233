#include "mvmdp/grid_oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "mvmdp/augmented_dp.hpp"
#include "mvmdp/error.hpp"

namespace mvmdp {

std::vector<double> grid_points(const Interval& iv, double h) {
  if (!(h > 0)) throw ConfigError("grid step must be positive");
  if (iv.hi < iv.lo) throw ConfigError("empty grid interval");
  const auto n = static_cast<long long>(std::floor((iv.hi - iv.lo) / h + 1e-9));
  std::vector<double> ys;
  ys.reserve(static_cast<std::size_t>(n + 1));
  for (long long i = 0; i <= n; ++i) ys.push_back(iv.lo + static_cast<double>(i) * h);
  return ys;
}

std::vector<PseudoMeanCurve> sweep_states(const TabularMdp& mdp, const std::vector<int>& s0s, const Interval& iv,
                                          double h, const SweepOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  const auto ys = grid_points(iv, h);
  std::vector<PseudoMeanCurve> curves(s0s.size());
  for (std::size_t c = 0; c < s0s.size(); ++c) {
    curves[c].s0 = s0s[c];
    curves[c].h = h;
    curves[c].points.resize(ys.size());
    for (std::size_t i = 0; i < ys.size(); ++i) curves[c].points[i].y0 = ys[i];
  }
  InnerOptions inner;
  inner.eps_tie = opts.eps_tie;
  inner.threads = opts.threads;
  std::shared_ptr<const LatticeShape> shape;
  std::vector<double> offsets(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) offsets[i] = static_cast<double>(i) * h;
  if (opts.shared_table) {
    try {
      shape = build_lattice_shape(mdp, s0s, offsets, opts.lattice);
    } catch (const LatticeExplosion&) {
      shape.reset();  // roots do not share a quantum with the rewards; solve point by point
    }
  }
  if (shape) {
    inner.keep_tables = false;
    YLattice lat(shape, iv.lo);
    AugmentedSolution sol = solve_on_lattice(mdp, lat, inner);
    const StageGrid& g0 = shape->stages[0];
    for (std::size_t c = 0; c < s0s.size(); ++c)
      for (std::size_t i = 0; i < ys.size(); ++i) {
        auto idx = shape->locate(0, offsets[i]);
        if (!idx) throw SolverError("grid root missing from the shared lattice");
        const std::size_t cell = static_cast<std::size_t>(g0.state_pos[s0s[c]]) * g0.num_ys() + *idx;
        curves[c].points[i].value = sol.value(0, cell);
        curves[c].points[i].fingerprint = sol.fingerprint(0, cell);
      }
  } else {
    for (std::size_t c = 0; c < s0s.size(); ++c) {
      auto shape = build_lattice_shape(mdp, {s0s[c]}, {0.0}, opts.lattice);
      for (std::size_t i = 0; i < ys.size(); ++i) {
        AugmentedSolution sol = solve_on_lattice(mdp, YLattice(shape, ys[i]), inner);
        curves[c].points[i].value = sol.root_value(s0s[c]);
        curves[c].points[i].fingerprint = sol.root_fingerprint(s0s[c]);
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (auto& cv : curves) {
    cv.seconds = secs / static_cast<double>(curves.size());
    cv.seconds_per_point = cv.seconds / static_cast<double>(ys.size());
    finalize_curve(cv);
  }
  return curves;
}

PseudoMeanCurve sweep(const TabularMdp& mdp, int s0, const Interval& interval, double h, const SweepOptions& opts) {
  return sweep_states(mdp, {s0}, interval, h, opts).front();
}

void finalize_curve(PseudoMeanCurve& cv) {
  auto& pts = cv.points;
  int seg = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i > 0 && pts[i].fingerprint != pts[i - 1].fingerprint) ++seg;
    pts[i].segment = seg;
  }
  cv.argmax = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i].value > pts[cv.argmax].value) cv.argmax = i;
  if (!pts.empty()) {
    cv.y_star = pts[cv.argmax].y0;
    cv.J_star = pts[cv.argmax].value;
  }
  cv.maxima = local_maxima(cv);
}

SegmentReport segment_check(const PseudoMeanCurve& cv, double lambda, double rel_tol) {
  SegmentReport rep;
  const auto& p = cv.points;
  if (!p.empty()) rep.segments = static_cast<std::size_t>(p.back().segment - p.front().segment + 1);
  double scale = 0.0;
  for (const auto& x : p) scale = std::max(scale, std::abs(x.value));
  const double expected = -2.0 * lambda * cv.h * cv.h;
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, scale);
  for (std::size_t i = 1; i + 1 < p.size(); ++i) {
    if (p[i - 1].segment != p[i].segment || p[i + 1].segment != p[i].segment) continue;
    ++rep.checked;
    const double d2 = p[i - 1].value - 2.0 * p[i].value + p[i + 1].value;
    const double err = std::abs(d2 - expected);
    if (expected != 0.0) rep.max_relative_error = std::max(rep.max_relative_error, err / std::abs(expected));
    if (err > rel_tol * std::abs(expected) + floor) rep.violations.push_back({i, p[i].y0, d2, expected});
  }
  return rep;
}

std::vector<LocalMax> local_maxima(const PseudoMeanCurve& cv) {
  const auto& p = cv.points;
  std::vector<LocalMax> out;
  if (p.empty()) return out;
  double gmax = -std::numeric_limits<double>::infinity(), scale = 0.0;
  for (const auto& x : p) {
    gmax = std::max(gmax, x.value);
    scale = std::max(scale, std::abs(x.value));
  }
  const double tol = 1e-12 * std::max(1.0, scale);
  std::size_t a = 0;
  while (a < p.size()) {
    std::size_t b = a;
    while (b + 1 < p.size() && std::abs(p[b + 1].value - p[a].value) <= tol) ++b;
    const bool left = a == 0 || p[a - 1].value < p[a].value;
    const bool right = b + 1 == p.size() || p[b + 1].value < p[b].value;
    if (left && right) out.push_back({a, p[a].y0, p[a].value, p[a].value >= gmax - tol});
    a = b + 1;
  }
  return out;
}

}  // namespace mvmdp
