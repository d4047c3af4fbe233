#include "mvmdp/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "mvmdp/error.hpp"
#include "mvmdp/policy_eval.hpp"
#include "stage_step.hpp"

namespace mvmdp {

namespace {

using Key = std::pair<int, long long>;
using RowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

Key key_of(int s, double rho) { return {s, std::llround(rho * 1e9)}; }

std::optional<int> defined_action(const TabularMdp& mdp, const HistoryPolicyView& view, int t, int s, double rho) {
  auto a = view.action(t, s, rho);
  if (!a || mdp.action_slot(s, *a) < 0) return std::nullopt;
  return a;
}

// Cells reachable under any of the views, plus one chain per view over that universe.
std::vector<StagewiseChain> build_chains(const TabularMdp& mdp, const std::vector<const HistoryPolicyView*>& views,
                                         int s0) {
  const int T = mdp.horizon();
  std::vector<std::vector<ChainCell>> cells(T + 1);
  cells[0].push_back({s0, 0.0});
  for (int t = 0; t < T; ++t) {
    std::map<Key, double> next;
    for (const ChainCell& c : cells[t]) {
      bool padded = false;
      for (const auto* v : views) {
        auto a = defined_action(mdp, *v, t, c.state, c.rho);
        if (!a) {
          padded = true;
          continue;
        }
        mdp.for_each_outcome(t, mdp.pair(c.state, mdp.action_slot(c.state, *a)),
                             [&](std::size_t, double p, int s2, double r) {
                               if (p > 0) next.try_emplace(key_of(s2, c.rho + r), c.rho + r);
                             });
      }
      if (padded) next.try_emplace(key_of(c.state, c.rho), c.rho);
    }
    for (const auto& [k, rho] : next) cells[t + 1].push_back({k.first, rho});
  }
  std::vector<std::map<Key, std::size_t>> index(T + 1);
  for (int t = 0; t <= T; ++t)
    for (std::size_t i = 0; i < cells[t].size(); ++i) index[t][key_of(cells[t][i].state, cells[t][i].rho)] = i;

  std::vector<StagewiseChain> out;
  for (const auto* v : views) {
    StagewiseChain ch;
    ch.s0 = s0;
    ch.y0 = v->y0();
    ch.lambda = mdp.lambda();
    ch.cells = cells;
    ch.actions.resize(T);
    ch.P.resize(T);
    ch.r.resize(T + 1);
    for (int t = 0; t < T; ++t) {
      const auto& cur = cells[t];
      std::vector<Eigen::Triplet<double>> trip;
      ch.r[t] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cur.size()));
      ch.actions[t].assign(cur.size(), -1);
      for (std::size_t i = 0; i < cur.size(); ++i) {
        const ChainCell& c = cur[i];
        auto a = defined_action(mdp, *v, t, c.state, c.rho);
        if (!a) {
          trip.emplace_back(i, index[t + 1].at(key_of(c.state, c.rho)), 1.0);
          continue;
        }
        ch.actions[t][i] = *a;
        double er = 0.0;
        mdp.for_each_outcome(t, mdp.pair(c.state, mdp.action_slot(c.state, *a)),
                             [&](std::size_t, double p, int s2, double r) {
                               if (p <= 0) return;
                               er += p * r;
                               trip.emplace_back(i, index[t + 1].at(key_of(s2, c.rho + r)), p);
                             });
        ch.r[t](static_cast<Eigen::Index>(i)) = er;
      }
      ch.P[t].resize(static_cast<Eigen::Index>(cur.size()), static_cast<Eigen::Index>(cells[t + 1].size()));
      ch.P[t].setFromTriplets(trip.begin(), trip.end());
    }
    out.push_back(std::move(ch));
  }
  return out;
}

void check_conformable(const StagewiseChain& u, const StagewiseChain& v) {
  if (u.horizon() != v.horizon()) throw ConfigError("chains have different horizons");
  for (int t = 0; t <= u.horizon(); ++t) {
    if (u.cells[t].size() != v.cells[t].size()) throw ConfigError("chains are not built on a common cell universe");
    for (std::size_t i = 0; i < u.cells[t].size(); ++i)
      if (u.cells[t][i].state != v.cells[t][i].state || u.cells[t][i].rho != v.cells[t][i].rho)
        throw ConfigError("chains are not built on a common cell universe");
  }
}

}  // namespace

std::vector<Eigen::VectorXd> StagewiseChain::occupancy() const {
  const int T = horizon();
  std::vector<Eigen::VectorXd> d(T + 1);
  d[0] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cells[0].size()));
  d[0](0) = 1.0;
  for (int t = 0; t < T; ++t) d[t + 1] = P[t].transpose() * d[t];
  return d;
}

double StagewiseChain::mean() const {
  const auto d = occupancy();
  double m = 0.0;
  for (int t = 0; t < horizon(); ++t) m += d[t].dot(r[t]);
  return m;
}

void set_reference(StagewiseChain& chain, double y_ref) {
  const int T = chain.horizon();
  chain.y_ref = y_ref;
  Eigen::VectorXd term(static_cast<Eigen::Index>(chain.cells[T].size()));
  for (std::size_t i = 0; i < chain.cells[T].size(); ++i) {
    const double y = y_ref - chain.cells[T][i].rho;
    term(static_cast<Eigen::Index>(i)) = -chain.lambda * y * y;
  }
  chain.r[T] = term;
  // g_t = sum_{k >= t} P_t ... P_{k-1} r_k
  chain.g.assign(T + 1, Eigen::VectorXd());
  for (int t = 0; t <= T; ++t) {
    Eigen::VectorXd acc = chain.r[t];
    for (int k = t + 1; k <= T; ++k) {
      Eigen::VectorXd w = chain.r[k];
      for (int tau = k - 1; tau >= t; --tau) w = chain.P[tau] * w;
      acc += w;
    }
    chain.g[t] = acc;
  }
}

StagewiseChain build_chain(const TabularMdp& mdp, const HistoryPolicyView& u, int s0) {
  auto chains = build_chains(mdp, {&u}, s0);
  StagewiseChain ch = std::move(chains[0]);
  set_reference(ch, ch.mean());
  return ch;
}

ChainPair build_chain_pair(const TabularMdp& mdp, const HistoryPolicyView& u, const HistoryPolicyView& v, int s0) {
  auto chains = build_chains(mdp, {&u, &v}, s0);
  ChainPair pr{std::move(chains[0]), std::move(chains[1])};
  const double ref = pr.u.mean();
  set_reference(pr.u, ref);
  set_reference(pr.v, ref);
  return pr;
}

double g_recursion_residual(const StagewiseChain& chain) {
  double worst = 0.0;
  for (int t = 0; t < chain.horizon(); ++t) {
    const Eigen::VectorXd res = chain.g[t] - chain.r[t] - chain.P[t] * chain.g[t + 1];
    if (res.size() > 0) worst = std::max(worst, res.cwiseAbs().maxCoeff());
  }
  return worst;
}

double performance_difference(const StagewiseChain& u, const StagewiseChain& v) {
  check_conformable(u, v);
  const auto dv = v.occupancy();
  double sum = 0.0;
  for (int t = 0; t < u.horizon(); ++t) {
    const Eigen::VectorXd step = v.r[t] - u.r[t] + (v.P[t] - u.P[t]) * u.g[t + 1];
    sum += dv[t].dot(step);
  }
  const double dm = v.mean() - u.mean();
  return sum + u.lambda * dm * dm;
}

double performance_derivative(const StagewiseChain& u, const StagewiseChain& v) {
  check_conformable(u, v);
  const auto du = u.occupancy();
  double sum = 0.0;
  for (int t = 0; t < u.horizon(); ++t) {
    const Eigen::VectorXd step = v.r[t] - u.r[t] + (v.P[t] - u.P[t]) * u.g[t + 1];
    sum += du[t].dot(step);
  }
  return sum;
}

FiniteDifference kernel_finite_difference(const TabularMdp& mdp, const HistoryPolicyView& u,
                                          const HistoryPolicyView& v, int s0) {
  auto centered = [&](double h) {
    MixedPolicy plus{u, v, h, MixMode::kernel_level};
    MixedPolicy minus{u, v, -h, MixMode::kernel_level};
    return (evaluate_mixed(mdp, plus, s0).mv - evaluate_mixed(mdp, minus, s0).mv) / (2.0 * h);
  };
  FiniteDifference fd;
  fd.coarse = centered(1e-4);
  fd.fine = centered(1e-5);
  fd.richardson = (100.0 * fd.fine - fd.coarse) / 99.0;
  return fd;
}

std::vector<OptimalityViolation> optimality_violations(const TabularMdp& mdp, const AugmentedPolicy& policy, int s0,
                                                       double eps_tie) {
  const int T = mdp.horizon();
  const YLattice& lat = policy.lattice();
  const LatticeShape& shape = lat.shape();
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();

  std::vector<std::vector<double>> g(T + 1);
  {
    const StageGrid& gt = shape.stages[T];
    g[T].resize(gt.cells());
    for (std::size_t c = 0; c < gt.cells(); ++c) {
      const double y = lat.y(T, c % gt.num_ys());
      g[T][c] = -mdp.lambda() * y * y;
    }
  }
  std::vector<detail::Succ> buf;
  auto q_of = [&](const detail::StageStep& step, int t, std::size_t i, std::size_t pr) {
    step.outcomes(pr, buf);
    double acc = 0.0;
    for (const auto& o : buf) {
      if (o.prob <= 0) continue;
      auto c = step.next_cell(i, o);
      if (!c) return nan;
      acc += o.prob * (o.reward + g[t + 1][*c]);
    }
    return acc;
  };
  for (int t = T - 1; t >= 0; --t) {
    const StageGrid& gt = shape.stages[t];
    const std::size_t ny = gt.num_ys();
    g[t].assign(gt.cells(), nan);
    detail::StageStep step(mdp, shape, t);
    for (std::size_t c = 0; c < gt.cells(); ++c) {
      const int s = gt.states[c / ny];
      const int a = policy.action_at(t, c);
      const int slot = a < 0 ? -1 : mdp.action_slot(s, a);
      if (slot >= 0) g[t][c] = q_of(step, t, c % ny, mdp.pair(s, slot));
    }
  }

  std::vector<OptimalityViolation> out;
  const auto reach = reachable_cells(mdp, policy, s0);
  for (int t = 0; t < T; ++t) {
    const StageGrid& gt = shape.stages[t];
    const std::size_t ny = gt.num_ys();
    detail::StageStep step(mdp, shape, t);
    for (std::size_t c : reach[t]) {
      const int s = gt.states[c / ny];
      const int chosen = policy.action_at(t, c);
      const double base = g[t][c];
      if (std::isnan(base)) continue;
      double best = base;
      int better = chosen;
      const auto adm = mdp.admissible(s);
      for (std::size_t k = 0; k < adm.size(); ++k) {
        const double q = q_of(step, t, c % ny, mdp.pair(s, static_cast<int>(k)));
        if (!std::isnan(q) && q > best) {
          best = q;
          better = adm[k];
        }
      }
      if (best > base + eps_tie) out.push_back({t, s, lat.y(t, c % ny), c, chosen, better, best - base});
    }
  }
  return out;
}

DiagnoseReport diagnose(const TabularMdp& mdp, const HistoryPolicyView& u, const HistoryPolicyView& v, int s0) {
  DiagnoseReport rep;
  const ChainPair pr = build_chain_pair(mdp, u, v, s0);
  rep.difference_formula = performance_difference(pr.u, pr.v);
  rep.direct_difference = evaluate(mdp, v, s0, v.y0()).mv - evaluate(mdp, u, s0, u.y0()).mv;
  rep.derivative_formula = performance_derivative(pr.u, pr.v);
  rep.finite_difference = kernel_finite_difference(mdp, u, v, s0);
  rep.g_residual = std::max(g_recursion_residual(pr.u), g_recursion_residual(pr.v));
  for (const auto& st : pr.u.cells) rep.cells += st.size();
  return rep;
}

}  // namespace mvmdp
