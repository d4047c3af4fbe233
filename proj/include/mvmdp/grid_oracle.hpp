#pragma once

#include <cstdint>
#include <vector>

#include "mvmdp/lattice.hpp"
#include "mvmdp/mdp.hpp"
#include "mvmdp/parallel.hpp"

namespace mvmdp {

struct CurvePoint {
  double y0 = 0.0;
  double value = 0.0;  // optimal pseudo mean-variance at y0
  std::uint64_t fingerprint = 0;
  int segment = 0;
};

struct LocalMax {
  std::size_t index = 0;
  double y = 0.0;
  double value = 0.0;
  bool is_global = false;
};

struct PseudoMeanCurve {
  int s0 = 0;
  double h = 0.0;
  std::vector<CurvePoint> points;
  std::size_t argmax = 0;
  double y_star = 0.0;
  double J_star = 0.0;
  std::vector<LocalMax> maxima;
  double seconds = 0.0;
  double seconds_per_point = 0.0;
};

struct SweepOptions {
  double eps_tie = 1e-9;
  bool shared_table = true;  // one lattice for all grid roots; false solves each point separately
  LatticeOptions lattice;
  int threads = default_threads();
};

// Grid y0 = lo + i h for i = 0..floor((hi - lo)/h).
std::vector<double> grid_points(const Interval& interval, double h);

PseudoMeanCurve sweep(const TabularMdp& mdp, int s0, const Interval& interval, double h, const SweepOptions& opts = {});
// All initial states at once (one shared table over every root and every s0).
std::vector<PseudoMeanCurve> sweep_states(const TabularMdp& mdp, const std::vector<int>& s0s, const Interval& interval,
                                          double h, const SweepOptions& opts = {});

// Fills segments, argmax and local maxima from points.
void finalize_curve(PseudoMeanCurve& curve);

struct SegmentViolation {
  std::size_t index = 0;
  double y = 0.0;
  double second_difference = 0.0;
  double expected = 0.0;
};

struct SegmentReport {
  std::size_t segments = 0;
  std::size_t checked = 0;  // centered stencils inside a single segment
  double max_relative_error = 0.0;
  std::vector<SegmentViolation> violations;
  bool ok() const { return violations.empty(); }
};

// Centered second differences inside constant-fingerprint segments against -2 lambda h^2.
SegmentReport segment_check(const PseudoMeanCurve& curve, double lambda, double rel_tol = 1e-6);

// Strict local maxima (plateaus count once), including boundary maxima.
std::vector<LocalMax> local_maxima(const PseudoMeanCurve& curve);

}  // namespace mvmdp
