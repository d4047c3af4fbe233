#include "mvmdp/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "mvmdp/error.hpp"
#include "stage_step.hpp"

namespace mvmdp {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iters: return "max_iters";
    case SolveStatus::break_point_escaped_then_converged: return "break_point_escaped_then_converged";
    case SolveStatus::cycle_detected: return "cycle_detected";
  }
  return "unknown";
}

double default_y0_init(const TabularMdp& mdp, int s0) { return markov_policy_mean(mdp, myopic_policy(mdp), s0); }

std::vector<std::vector<double>> mean_to_go(const TabularMdp& mdp, const AugmentedPolicy& policy) {
  const int T = mdp.horizon();
  const LatticeShape& shape = policy.lattice().shape();
  std::vector<std::vector<double>> m(T + 1);
  m[T].assign(shape.stages[T].cells(), 0.0);
  std::vector<detail::Succ> buf;
  for (int t = T - 1; t >= 0; --t) {
    const StageGrid& g = shape.stages[t];
    const std::size_t ny = g.num_ys();
    m[t].assign(g.cells(), std::numeric_limits<double>::quiet_NaN());
    detail::StageStep step(mdp, shape, t);
    for (std::size_t p = 0; p < g.num_states(); ++p) {
      const int s = g.states[p];
      for (std::size_t i = 0; i < ny; ++i) {
        const std::size_t cell = p * ny + i;
        const int a = policy.action_at(t, cell);
        const int slot = a < 0 ? -1 : mdp.action_slot(s, a);
        if (slot < 0) continue;
        step.outcomes(mdp.pair(s, slot), buf);
        double acc = 0.0;
        for (const auto& o : buf) {
          if (o.prob <= 0) continue;
          auto c = step.next_cell(i, o);
          acc += o.prob * (o.reward + (c ? m[t + 1][*c] : std::numeric_limits<double>::quiet_NaN()));
        }
        m[t][cell] = acc;
      }
    }
  }
  return m;
}

std::vector<std::vector<std::pair<std::size_t, double>>> occupancy(const TabularMdp& mdp, const AugmentedPolicy& policy,
                                                                   int s0) {
  const int T = mdp.horizon();
  const YLattice& lat = policy.lattice();
  const LatticeShape& shape = lat.shape();
  std::vector<std::vector<std::pair<std::size_t, double>>> out(T + 1);
  auto root = lat.cell(0, s0, lat.base());
  if (!root) throw SolverError("no root cell for state " + std::to_string(s0));
  out[0].push_back({*root, 1.0});
  std::vector<double> mass;
  std::vector<char> mark;
  std::vector<std::size_t> touched;
  std::vector<detail::Succ> buf;
  for (int t = 0; t < T; ++t) {
    const StageGrid& g = shape.stages[t];
    mass.assign(shape.stages[t + 1].cells(), 0.0);
    mark.assign(mass.size(), 0);
    touched.clear();
    detail::StageStep step(mdp, shape, t);
    for (auto [cell, m] : out[t]) {
      const int s = g.states[cell / g.num_ys()];
      const int a = policy.action_at(t, cell);
      const int slot = a < 0 ? -1 : mdp.action_slot(s, a);
      if (slot < 0) throw SolverError("policy undefined at a reached cell");
      step.outcomes(mdp.pair(s, slot), buf);
      for (const auto& o : buf) {
        if (o.prob <= 0) continue;
        auto c = step.next_cell(cell % g.num_ys(), o);
        if (!c) throw SolverError("successor outside the lattice");
        if (!mark[*c]) {
          mark[*c] = 1;
          touched.push_back(*c);
        }
        mass[*c] += m * o.prob;
      }
    }
    std::sort(touched.begin(), touched.end());
    for (std::size_t c : touched) out[t + 1].push_back({c, mass[c]});
  }
  return out;
}

namespace {

struct Escape {
  bool found = false;
  AugmentedPolicy policy;
  EvalResult eval;
  BreakPointEvent event;
};

// Single-cell swaps among tied actions at reachable cells.  A swap at a cell with reach
// probability m changes the mean by m (M' - M) and the pseudo mean-variance at y by m (Q' - Q).
Escape break_point_escape(const TabularMdp& mdp, const AugmentedSolution& sol, const AugmentedPolicy& pol,
                          const EvalResult& ev, int s0, const SolveOptions& opts, int iteration) {
  Escape esc;
  esc.event.iteration = iteration;
  const int T = mdp.horizon();
  const double lambda = mdp.lambda();
  const double y = pol.root();
  const auto occ = occupancy(mdp, pol, s0);
  struct Tied {
    int t;
    std::size_t cell;
    double mass;
  };
  std::vector<Tied> tied;
  for (int t = 0; t < T; ++t)
    for (auto [cell, m] : occ[t])
      if (m > 0 && sol.tie_count(t, cell) > 1) tied.push_back({t, cell, m});
  esc.event.tied_cells = tied.size();
  if (tied.empty()) return esc;

  const auto mtg = mean_to_go(mdp, pol);
  const LatticeShape& shape = pol.lattice().shape();
  struct Cand {
    double predicted;
    int t;
    std::size_t cell;
    int action;
  };
  std::vector<Cand> cands;
  std::vector<detail::Succ> buf;
  for (const auto& [t, cell, m] : tied) {
    if (cands.size() >= opts.escape_candidates) break;
    const StageGrid& g = shape.stages[t];
    const int s = g.states[cell / g.num_ys()];
    const std::size_t i = cell % g.num_ys();
    const auto q = sol.q_values(mdp, t, cell);
    const int chosen = pol.action_at(t, cell);
    const double q_chosen = q[mdp.action_slot(s, chosen)];
    detail::StageStep step(mdp, shape, t);
    for (int a : sol.tied_actions(mdp, t, cell)) {
      if (a == chosen || cands.size() >= opts.escape_candidates) continue;
      const int slot = mdp.action_slot(s, a);
      step.outcomes(mdp.pair(s, slot), buf);
      double mean_alt = 0.0;
      for (const auto& o : buf) {
        if (o.prob <= 0) continue;
        auto c = step.next_cell(i, o);
        mean_alt += o.prob * (o.reward + (c ? mtg[t + 1][*c] : 0.0));
      }
      const double dmu = m * (mean_alt - mtg[t][cell]);
      const double pseudo = ev.pseudo_mv + m * (q[slot] - q_chosen);
      const double mu2 = ev.mean + dmu;
      cands.push_back({pseudo + lambda * (mu2 - y) * (mu2 - y), t, cell, a});
    }
  }
  esc.event.candidates = cands.size();
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.predicted > b.predicted; });
  int verified = 0;
  for (const Cand& c : cands) {
    if (c.predicted <= ev.mv + opts.eps_fix || verified >= 32) break;
    ++verified;
    AugmentedPolicy alt = pol.with_action(c.t, c.cell, c.action);
    const EvalResult ev2 = evaluate(mdp, alt, s0, y);
    if (ev2.mv > ev.mv + opts.eps_fix) {
      esc.found = true;
      esc.policy = alt;
      esc.eval = ev2;
      esc.event.improved = true;
      esc.event.gain = ev2.mv - ev.mv;
      break;
    }
  }
  return esc;
}

}  // namespace

SolveReport solve(const TabularMdp& mdp, int s0, const SolveOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  if (s0 < 0 || s0 >= mdp.num_states()) throw ConfigError("s0 outside the state space");
  SolveReport rep;
  rep.s0 = s0;
  rep.y0_init = opts.y0_init ? *opts.y0_init : default_y0_init(mdp, s0);

  std::shared_ptr<const LatticeShape> shape = opts.shape;
  if (!shape)
    shape = opts.quantize ? build_quantized_shape(mdp, {s0}, 0.0, 0.0, *opts.quantize, opts.lattice)
                          : build_lattice_shape(mdp, {s0}, {0.0}, opts.lattice);

  InnerOptions inner;
  inner.eps_tie = opts.eps_tie;
  inner.threads = opts.threads;

  double y = rep.y0_init;
  AugmentedPolicy incumbent;
  bool escaped = false;
  std::set<std::pair<std::uint64_t, long long>> seen;
  rep.status = SolveStatus::max_iters;

  for (int k = 0; k < opts.max_iters; ++k) {
    inner.incumbent = incumbent.empty() ? nullptr : &incumbent;
    AugmentedSolution sol = solve_on_lattice(mdp, YLattice(shape, y), inner);
    AugmentedPolicy pol = sol.policy();
    const EvalResult ev = evaluate(mdp, pol, s0, y);
    const std::uint64_t fp = sol.root_fingerprint(s0);
    rep.trace.push_back({k, y, ev.mv, sol.root_value(s0), ev.mean, fp});
    rep.has_policy = true;
    rep.policy = pol;
    rep.y_star = y;
    rep.eval = ev;

    if (!incumbent.empty() && std::abs(ev.mean - y) <= opts.eps_fix && same_on_common_support(mdp, incumbent, pol, s0)) {
      if (opts.break_point_escape) {
        Escape esc = break_point_escape(mdp, sol, pol, ev, s0, opts, k);
        if (esc.event.tied_cells > 0) rep.events.push_back(esc.event);
        if (esc.found) {
          escaped = true;
          incumbent = esc.policy.rebased(esc.eval.mean);
          y = esc.eval.mean;
          seen.clear();
          continue;
        }
      }
      rep.status = escaped ? SolveStatus::break_point_escaped_then_converged : SolveStatus::converged;
      break;
    }
    const auto key = std::make_pair(fp, std::llround(y * 1e9));
    if (!seen.insert(key).second) {
      rep.status = SolveStatus::cycle_detected;
      break;
    }
    incumbent = pol;
    y = ev.mean;
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

MultiStartReport solve_multi_start(const TabularMdp& mdp, int s0, const std::vector<double>& y0_inits,
                                   const SolveOptions& opts) {
  if (y0_inits.empty()) throw ConfigError("multi-start needs at least one initial pseudo mean");
  MultiStartReport out;
  SolveOptions o = opts;
  if (!o.shape)
    o.shape = o.quantize ? build_quantized_shape(mdp, {s0}, 0.0, 0.0, *o.quantize, o.lattice)
                         : build_lattice_shape(mdp, {s0}, {0.0}, o.lattice);
  const int outer = std::max(1, std::min<int>(opts.threads, static_cast<int>(y0_inits.size())));
  o.threads = std::max(1, opts.threads / outer);
  out.runs.resize(y0_inits.size());
  parallel_for(y0_inits.size(), outer, [&](std::size_t i) {
    SolveOptions oi = o;
    oi.y0_init = y0_inits[i];
    out.runs[i] = solve(mdp, s0, oi);
  });
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < out.runs.size(); ++i) {
    const auto& r = out.runs[i];
    if (r.has_policy && r.eval.mv > best) {
      best = r.eval.mv;
      out.best = i;
    }
    if (!r.converged()) continue;
    bool known = false;
    for (double y : out.distinct_optima)
      if (std::abs(y - r.y_star) <= 1e-6 * std::max(1.0, std::abs(y))) known = true;
    if (!known) out.distinct_optima.push_back(r.y_star);
  }
  std::sort(out.distinct_optima.begin(), out.distinct_optima.end());
  out.disagreement = out.distinct_optima.size() > 1;
  return out;
}

LinearFit fit_linear_structure(const TabularMdp& mdp, int s0_a, double y_a, int s0_b, double y_b, int target_s0) {
  if (!mdp.meta().linear_convex) throw ConfigError("model lacks the linear-convex flag; linear extrapolation refused");
  if (s0_a == s0_b) throw ConfigError("degenerate fit: identical initial states");
  auto x = [&](int s) {
    const auto& v = mdp.meta().state_values;
    return v.empty() ? static_cast<double>(s) : v.at(s);
  };
  LinearFit f;
  f.x_a = x(s0_a);
  f.x_b = x(s0_b);
  f.y_a = y_a;
  f.y_b = y_b;
  if (f.x_a == f.x_b) throw ConfigError("degenerate fit: identical state values");
  f.slope = (y_b - y_a) / (f.x_b - f.x_a);
  f.intercept = y_a - f.slope * f.x_a;
  f.x_target = x(target_s0);
  f.predicted = f.slope * f.x_target + f.intercept;
  return f;
}

LinearFit linear_structure_extrapolate(const TabularMdp& mdp, int s0_a, int s0_b, int target_s0,
                                       const SolveOptions& opts) {
  if (!mdp.meta().linear_convex) throw ConfigError("model lacks the linear-convex flag; linear extrapolation refused");
  if (s0_a == s0_b) throw ConfigError("degenerate fit: identical initial states");
  const SolveReport a = solve(mdp, s0_a, opts);
  const SolveReport b = solve(mdp, s0_b, opts);
  if (!a.converged() || !b.converged()) throw SolverError("extrapolation needs converged solves at both states");
  return fit_linear_structure(mdp, s0_a, a.y_star, s0_b, b.y_star, target_s0);
}

}  // namespace mvmdp
