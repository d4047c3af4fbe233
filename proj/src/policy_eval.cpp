#include "mvmdp/policy_eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "mvmdp/error.hpp"
#include "stage_step.hpp"

namespace mvmdp {

namespace {

[[noreturn]] void undefined_at(int t, int s, double y) {
  std::ostringstream os;
  os.precision(12);
  os << "policy undefined at reached cell (t=" << t << ", s=" << s << ", y=" << y << ")";
  throw SolverError(os.str());
}

void sort_entries(TerminalDistribution& d) {
  std::sort(d.entries.begin(), d.entries.end(), [](const TerminalEntry& a, const TerminalEntry& b) {
    return a.state != b.state ? a.state < b.state : a.rho < b.rho;
  });
}

TerminalDistribution forward_dense(const TabularMdp& mdp, const AugmentedPolicy& policy, int s0) {
  const int T = mdp.horizon();
  const YLattice& lat = policy.lattice();
  const LatticeShape& shape = lat.shape();
  auto root = lat.cell(0, s0, lat.base());
  if (!root) undefined_at(0, s0, lat.base());
  std::vector<double> cur(shape.stages[0].cells(), 0.0), nxt;
  std::vector<std::size_t> active{*root}, next_active;
  std::vector<char> mark;
  cur[*root] = 1.0;
  std::vector<detail::Succ> buf;
  for (int t = 0; t < T; ++t) {
    const StageGrid& g = shape.stages[t];
    const std::size_t ny = g.num_ys();
    nxt.assign(shape.stages[t + 1].cells(), 0.0);
    mark.assign(nxt.size(), 0);
    next_active.clear();
    detail::StageStep step(mdp, shape, t);
    for (std::size_t cell : active) {
      const double m = cur[cell];
      const int s = g.states[cell / ny];
      const int a = policy.action_at(t, cell);
      const int slot = a < 0 ? -1 : mdp.action_slot(s, a);
      if (slot < 0) undefined_at(t, s, lat.y(t, cell % ny));
      step.outcomes(mdp.pair(s, slot), buf);
      for (const auto& o : buf) {
        if (o.prob <= 0) continue;
        auto c = step.next_cell(cell % ny, o);
        if (!c) undefined_at(t + 1, o.state, lat.y(t, cell % ny) - o.reward);
        if (!mark[*c]) {
          mark[*c] = 1;
          next_active.push_back(*c);
        }
        nxt[*c] += m * o.prob;
      }
    }
    std::sort(next_active.begin(), next_active.end());
    cur.swap(nxt);
    active.swap(next_active);
  }
  TerminalDistribution d;
  d.s0 = s0;
  const StageGrid& g = shape.stages[T];
  for (std::size_t cell : active)
    d.entries.push_back({g.states[cell / g.num_ys()], -g.offsets[cell % g.num_ys()], cur[cell]});
  sort_entries(d);
  return d;
}

// Forward pass over histories keyed by (state, accumulated reward).  rule(t, s, rho, out) fills
// (action, weight) pairs.
template <class Rule>
TerminalDistribution forward_generic(const TabularMdp& mdp, int s0, Rule&& rule) {
  using Key = std::pair<int, long long>;
  struct Val {
    double rho;
    double mass;
  };
  auto key = [](int s, double rho) { return Key{s, std::llround(rho * 1e9)}; };
  std::map<Key, Val> cur, nxt;
  cur[key(s0, 0.0)] = {0.0, 1.0};
  std::vector<std::pair<int, double>> acts;
  for (int t = 0; t < mdp.horizon(); ++t) {
    nxt.clear();
    for (const auto& [k, v] : cur) {
      acts.clear();
      rule(t, k.first, v.rho, acts);
      for (auto [a, w] : acts) {
        if (w == 0.0) continue;
        const int slot = mdp.action_slot(k.first, a);
        mdp.for_each_outcome(t, mdp.pair(k.first, slot), [&](std::size_t, double p, int next, double r) {
          if (p <= 0) return;
          const double rho2 = v.rho + r;
          auto [it, fresh] = nxt.try_emplace(key(next, rho2), Val{rho2, 0.0});
          it->second.mass += v.mass * w * p;
        });
      }
    }
    cur.swap(nxt);
  }
  TerminalDistribution d;
  d.s0 = s0;
  for (const auto& [k, v] : cur) d.entries.push_back({k.first, v.rho, v.mass});
  sort_entries(d);
  return d;
}

int view_action(const TabularMdp& mdp, const HistoryPolicyView& view, int t, int s, double rho) {
  auto a = view.action(t, s, rho);
  if (!a || mdp.action_slot(s, *a) < 0) undefined_at(t, s, view.y0() - rho);
  return *a;
}

}  // namespace

double TerminalDistribution::total_mass() const {
  double m = 0.0;
  for (const auto& e : entries) m += e.mass;
  return m;
}

TerminalDistribution forward_distribution(const TabularMdp& mdp, const HistoryPolicyView& view, int s0, double y0) {
  TerminalDistribution d;
  if (view.y0() == view.policy().root()) {
    d = forward_dense(mdp, view.policy(), s0);
  } else {
    d = forward_generic(mdp, s0, [&](int t, int s, double rho, std::vector<std::pair<int, double>>& out) {
      out.emplace_back(view_action(mdp, view, t, s, rho), 1.0);
    });
  }
  d.y0 = y0;
  return d;
}

TerminalDistribution forward_distribution(const TabularMdp& mdp, const AugmentedPolicy& policy, int s0, double y0) {
  return forward_distribution(mdp, HistoryPolicyView(policy, y0), s0, y0);
}

EvalResult summarize(const TerminalDistribution& dist, double lambda) {
  EvalResult r;
  r.y0 = dist.y0;
  double mean = 0.0, m2 = 0.0, pseudo = 0.0;
  for (const auto& e : dist.entries) {
    const double yT = dist.y0 - e.rho;
    mean += e.mass * e.rho;
    m2 += e.mass * e.rho * e.rho;
    pseudo += e.mass * (e.rho - lambda * yT * yT);
  }
  double var = 0.0;
  for (const auto& e : dist.entries) var += e.mass * (e.rho - mean) * (e.rho - mean);
  r.mean = mean;
  r.second_moment = m2;
  r.variance = std::max(var, 0.0);
  r.mv = mean - lambda * r.variance;
  r.pseudo_mv = pseudo;
  return r;
}

EvalResult evaluate(const TabularMdp& mdp, const AugmentedPolicy& policy, int s0, double y0) {
  return summarize(forward_distribution(mdp, policy, s0, y0), mdp.lambda());
}

EvalResult evaluate(const TabularMdp& mdp, const HistoryPolicyView& view, int s0, double y0) {
  return summarize(forward_distribution(mdp, view, s0, y0), mdp.lambda());
}

EvalResult evaluate_mixed(const TabularMdp& mdp, const MixedPolicy& mix, int s0) {
  return evaluate_mixed(mdp, mix, s0, mix.first.y0());
}

EvalResult evaluate_mixed(const TabularMdp& mdp, const MixedPolicy& mix, int s0, double y0) {
  const double d = mix.delta;
  if (mix.mode == MixMode::policy_level) {
    if (!(d >= 0.0 && d <= 1.0)) throw ConfigError("mixing weight must lie in [0,1]");
    const EvalResult a = evaluate(mdp, mix.first, s0, y0);
    if (d == 0.0) return a;
    const EvalResult b = evaluate(mdp, mix.second, s0, y0);
    if (d == 1.0) return b;
    EvalResult r;
    r.y0 = y0;
    r.mean = (1 - d) * a.mean + d * b.mean;
    r.second_moment = (1 - d) * a.second_moment + d * b.second_moment;
    r.variance = std::max(0.0, (1 - d) * a.variance + d * b.variance + d * (1 - d) * (a.mean - b.mean) * (a.mean - b.mean));
    r.mv = r.mean - mdp.lambda() * r.variance;
    r.pseudo_mv = (1 - d) * a.pseudo_mv + d * b.pseudo_mv;
    return r;
  }
  if (d == 0.0) return evaluate(mdp, mix.first, s0, y0);
  if (d == 1.0) return evaluate(mdp, mix.second, s0, y0);
  // Kernel-level weights outside [0,1] are accepted as a signed measure (finite differences at 0).
  auto dist = forward_generic(mdp, s0, [&](int t, int s, double rho, std::vector<std::pair<int, double>>& out) {
    const int a = view_action(mdp, mix.first, t, s, rho);
    const int b = view_action(mdp, mix.second, t, s, rho);
    if (a == b) {
      out.emplace_back(a, 1.0);
    } else {
      out.emplace_back(a, 1.0 - d);
      out.emplace_back(b, d);
    }
  });
  dist.y0 = y0;
  EvalResult r = summarize(dist, mdp.lambda());
  if (d < 0.0 || d > 1.0) {
    // signed weights: variance may dip below zero; keep the raw value
    double var = 0.0;
    for (const auto& e : dist.entries) var += e.mass * (e.rho - r.mean) * (e.rho - r.mean);
    r.variance = var;
    r.mv = r.mean - mdp.lambda() * var;
  }
  return r;
}

namespace {

template <class Pick>
std::size_t draw_outcome(const TabularMdp& mdp, int t, std::size_t pr, double u, Pick&& pick) {
  double cum = 0.0;
  std::size_t chosen = 0, last = 0;
  bool done = false;
  mdp.for_each_outcome(t, pr, [&](std::size_t o, double p, int next, double r) {
    if (done || p <= 0) return;
    last = o;
    cum += p;
    if (u < cum) {
      chosen = o;
      done = true;
      pick(o, next, r);
    }
  });
  if (!done)
    mdp.for_each_outcome(t, pr, [&](std::size_t o, double, int next, double r) {
      if (o == last) pick(o, next, r);
    });
  return done ? chosen : last;
}

}  // namespace

PathRecord sample_path(const TabularMdp& mdp, const HistoryPolicyView& view, int s0, CounterRng& rng) {
  PathRecord rec;
  int s = s0;
  double rho = 0.0;
  for (int t = 0; t < mdp.horizon(); ++t) {
    const int a = view_action(mdp, view, t, s, rho);
    rec.states.push_back(s);
    rec.actions.push_back(a);
    int next = s;
    double rew = 0.0;
    draw_outcome(mdp, t, mdp.pair(s, mdp.action_slot(s, a)), rng.uniform(), [&](std::size_t, int n, double r) {
      next = n;
      rew = r;
    });
    rec.rewards.push_back(rew);
    rho += rew;
    s = next;
  }
  rec.states.push_back(s);
  rec.total = rho;
  return rec;
}

PathRecord sample_augmented_path(const TabularMdp& mdp, const AugmentedPolicy& policy, int s0, CounterRng& rng) {
  const YLattice& lat = policy.lattice();
  const LatticeShape& shape = lat.shape();
  auto root = lat.cell(0, s0, lat.base());
  if (!root) undefined_at(0, s0, lat.base());
  std::size_t cell = *root;
  PathRecord rec;
  std::vector<detail::Succ> buf;
  for (int t = 0; t < mdp.horizon(); ++t) {
    const StageGrid& g = shape.stages[t];
    const int s = g.states[cell / g.num_ys()];
    const int a = policy.action_at(t, cell);
    const int slot = a < 0 ? -1 : mdp.action_slot(s, a);
    if (slot < 0) undefined_at(t, s, lat.y(t, cell % g.num_ys()));
    rec.states.push_back(s);
    rec.actions.push_back(a);
    const std::size_t pr = mdp.pair(s, slot);
    const std::size_t o = draw_outcome(mdp, t, pr, rng.uniform(), [](std::size_t, int, double) {});
    detail::StageStep step(mdp, shape, t);
    step.outcomes(pr, buf);
    const auto& succ = buf[o];
    auto c = step.next_cell(cell % g.num_ys(), succ);
    if (!c) undefined_at(t + 1, succ.state, lat.y(t, cell % g.num_ys()) - succ.reward);
    rec.rewards.push_back(succ.reward);
    rec.total += succ.reward;
    cell = *c;
  }
  const StageGrid& g = shape.stages[mdp.horizon()];
  rec.states.push_back(g.states[cell / g.num_ys()]);
  return rec;
}

SimulationResult summarize_samples(const std::vector<double>& x) {
  SimulationResult r;
  const std::size_t n = x.size();
  r.paths = n;
  if (n < 2) throw ConfigError("simulation needs at least two paths");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double m2 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  const double nn = static_cast<double>(n);
  const double var = m2 / (nn - 1);
  m4 /= nn;
  r.mean = mean;
  r.variance = var;
  r.se_mean = std::sqrt(var / nn);
  r.se_variance = std::sqrt(std::max(0.0, m4 - (nn - 3) / (nn - 1) * var * var) / nn);
  r.ci_mean = 1.96 * r.se_mean;
  r.ci_variance = 1.96 * r.se_variance;
  return r;
}

SimulationResult simulate(const TabularMdp& mdp, const HistoryPolicyView& view, int s0, std::size_t n_paths,
                          std::uint64_t seed, int threads) {
  std::vector<double> totals(n_paths);
  parallel_for(n_paths, threads, [&](std::size_t i) {
    CounterRng rng(seed, i);
    totals[i] = sample_path(mdp, view, s0, rng).total;
  });
  return summarize_samples(totals);
}

SimulationResult simulate(const TabularMdp& mdp, const AugmentedPolicy& policy, int s0, double y0,
                          std::size_t n_paths, std::uint64_t seed, int threads) {
  return simulate(mdp, HistoryPolicyView(policy, y0), s0, n_paths, seed, threads);
}

}  // namespace mvmdp
