#include "mvmdp/augmented_dp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include "mvmdp/error.hpp"
#include "stage_step.hpp"

namespace mvmdp {

using detail::Succ;
using detail::StageStep;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_multiple(double x, double q) {
  const double r = std::round(x / q);
  return std::abs(x - r * q) <= 1e-9 * std::max(1.0, std::abs(x));
}

// Post-decision tables W(m, z) = sum_j p_j [r_j(m) + V_{t+1}(next_j(m), z - r_j(m))] and the
// matching outcome-hash folds, over a contiguous integer range of z.
struct PostTables {
  std::vector<int> post_pos;          // per post state, -1 when unused
  std::vector<std::int64_t> kc;       // decision reward in quanta, per pair
  std::int64_t z_front = 0;
  std::size_t nz = 0;
  std::vector<double> w;              // [post position][nz]
  std::vector<std::uint64_t> hw;
};

bool build_post_tables(const TabularMdp& mdp, const LatticeShape& shape, int t, const std::vector<double>& vnext,
                       const std::vector<std::uint64_t>* hnext, int threads, PostTables& pt) {
  const auto& ns = std::get<NoiseStage>(mdp.stage(t));
  const StageGrid& g = shape.stages[t];
  const StageGrid& gn = shape.stages[t + 1];
  const double q = shape.quantum;
  pt.kc.assign(mdp.num_pairs(), 0);
  pt.post_pos.assign(ns.num_post, -1);
  std::vector<int> posts;
  std::int64_t kc_lo = std::numeric_limits<std::int64_t>::max(), kc_hi = std::numeric_limits<std::int64_t>::min();
  for (int s : g.states)
    for (std::size_t k = 0; k < mdp.admissible(s).size(); ++k) {
      const std::size_t pr = mdp.pair(s, static_cast<int>(k));
      const double c = ns.decision_reward[pr];
      if (!is_multiple(c, q)) return false;
      pt.kc[pr] = std::llround(c / q);
      kc_lo = std::min(kc_lo, pt.kc[pr]);
      kc_hi = std::max(kc_hi, pt.kc[pr]);
      const int m = ns.post[pr];
      if (pt.post_pos[m] < 0) {
        pt.post_pos[m] = 0;
        posts.push_back(m);
      }
    }
  std::sort(posts.begin(), posts.end());
  for (std::size_t i = 0; i < posts.size(); ++i) pt.post_pos[posts[i]] = static_cast<int>(i);
  for (const auto& at : ns.atoms) {
    if (at.prob <= 0) continue;
    for (int m : posts) {
      if (!is_multiple(at.reward[m], q)) return false;
      if (gn.state_pos[at.next[m]] < 0) return false;
    }
  }
  pt.z_front = g.ns.front() - kc_hi;
  pt.nz = static_cast<std::size_t>(g.ns.back() - kc_lo - pt.z_front + 1);
  pt.w.assign(posts.size() * pt.nz, 0.0);
  if (hnext) pt.hw.assign(posts.size() * pt.nz, 0);
  const std::size_t nyn = gn.num_ys();
  const auto nz = static_cast<std::int64_t>(pt.nz);

  parallel_for(posts.size(), threads, [&](std::size_t mi) {
    const int m = posts[mi];
    double* w = pt.w.data() + mi * pt.nz;
    std::uint64_t* hw = hnext ? pt.hw.data() + mi * pt.nz : nullptr;
    std::int64_t lo = 0, hi = nz;
    for (std::size_t j = 0; j < ns.atoms.size(); ++j) {
      const auto& at = ns.atoms[j];
      if (at.prob <= 0) continue;
      const double r2 = at.reward[m];
      const std::int64_t off = pt.z_front - std::llround(r2 / q) - gn.ns.front();
      const std::int64_t a = std::max<std::int64_t>(0, -off), b = std::min<std::int64_t>(nz, static_cast<std::int64_t>(nyn) - off);
      lo = std::max(lo, a);
      hi = std::min(hi, b);
      if (lo >= hi) break;
      const std::size_t base = static_cast<std::size_t>(gn.state_pos[at.next[m]]) * nyn;
      const double* v = vnext.data() + base + off;
      const double p = at.prob;
      for (std::int64_t z = lo; z < hi; ++z) w[z] += p * (r2 + v[z]);
      if (hw) {
        const std::uint64_t* h = hnext->data() + base + off;
        for (std::int64_t z = lo; z < hi; ++z) hw[z] += detail::outcome_hash(j, h[z]);
      }
    }
    for (std::int64_t z = 0; z < nz; ++z)
      if (z < lo || z >= hi) w[z] = kNaN;
  });
  return true;
}

}  // namespace

std::size_t AugmentedSolution::root_cell(int s0) const {
  auto c = lattice_.cell(0, s0, lattice_.base());
  if (!c) throw ConfigError("state " + std::to_string(s0) + " is not a root of this lattice");
  return *c;
}

double AugmentedSolution::root_value(int s0) const { return value_[0][root_cell(s0)]; }

std::uint64_t AugmentedSolution::root_fingerprint(int s0) const {
  if (!has_fingerprints()) throw ConfigError("solution was computed without fingerprints");
  return hash_[0][root_cell(s0)];
}

std::vector<double> AugmentedSolution::q_values(const TabularMdp& mdp, int t, std::size_t cell) const {
  if (value_[t + 1].empty()) throw ConfigError("stage tables were discarded");
  const LatticeShape& shape = lattice_.shape();
  const StageGrid& g = shape.stages[t];
  const std::size_t ny = g.num_ys();
  const int s = g.states[cell / ny];
  const std::size_t i = cell % ny;
  StageStep step(mdp, shape, t);
  std::vector<Succ> buf;
  std::vector<double> q;
  for (std::size_t k = 0; k < mdp.admissible(s).size(); ++k) {
    step.outcomes(mdp.pair(s, static_cast<int>(k)), buf);
    double acc = 0.0;
    for (const Succ& o : buf) {
      if (o.prob <= 0) continue;
      auto c = step.next_cell(i, o);
      if (!c) {
        acc = kNaN;
        break;
      }
      acc += o.prob * (o.reward + value_[t + 1][*c]);
    }
    q.push_back(acc);
  }
  return q;
}

std::vector<int> AugmentedSolution::tied_actions(const TabularMdp& mdp, int t, std::size_t cell) const {
  const auto q = q_values(mdp, t, cell);
  const int s = lattice_.stage(t).states[cell / lattice_.stage(t).num_ys()];
  double best = -std::numeric_limits<double>::infinity();
  for (double x : q)
    if (x > best) best = x;
  std::vector<int> out;
  for (std::size_t k = 0; k < q.size(); ++k)
    if (q[k] >= best - eps_tie_) out.push_back(mdp.admissible(s)[k]);
  std::sort(out.begin(), out.end());
  return out;
}

AugmentedSolution solve_on_lattice(const TabularMdp& mdp, const YLattice& lattice, const InnerOptions& opts) {
  const int T = mdp.horizon();
  if (lattice.horizon() != T) throw ConfigError("lattice horizon does not match the model");
  const LatticeShape& shape = lattice.shape();
  const double lambda = mdp.lambda();

  AugmentedSolution sol;
  sol.lattice_ = lattice;
  sol.eps_tie_ = opts.eps_tie;
  sol.value_.resize(T + 1);
  sol.actions_ = std::make_shared<ActionTables>(T);
  sol.ties_.resize(T);
  if (opts.fingerprints) sol.hash_.resize(T + 1);

  {
    const StageGrid& g = shape.stages[T];
    auto& v = sol.value_[T];
    v.resize(g.cells());
    if (opts.fingerprints) sol.hash_[T].resize(g.cells());
    const std::size_t ny = g.num_ys();
    for (std::size_t p = 0; p < g.num_states(); ++p)
      for (std::size_t i = 0; i < ny; ++i) {
        const double y = lattice.y(T, i);
        v[p * ny + i] = -lambda * y * y;
        if (opts.fingerprints) sol.hash_[T][p * ny + i] = detail::terminal_hash(T, g.states[p]);
      }
  }

  const AugmentedPolicy* inc = opts.incumbent;
  const bool inc_same_shape = inc && !inc->empty() && inc->lattice().shape_ptr() == lattice.shape_ptr();
  std::mutex snap_mu;

  for (int t = T - 1; t >= 0; --t) {
    const StageGrid& g = shape.stages[t];
    const StageGrid& gn = shape.stages[t + 1];
    const std::size_t ny = g.num_ys(), nyn = gn.num_ys();
    const auto& vnext = sol.value_[t + 1];
    const std::vector<std::uint64_t>* hnext = opts.fingerprints ? &sol.hash_[t + 1] : nullptr;
    auto& vout = sol.value_[t];
    auto& aout = (*sol.actions_)[t];
    auto& tout = sol.ties_[t];
    vout.assign(g.cells(), kNaN);
    aout.assign(g.cells(), -1);
    tout.assign(g.cells(), 0);
    if (opts.fingerprints) sol.hash_[t].assign(g.cells(), 0);
    StageStep step(mdp, shape, t);

    PostTables pt;
    const bool post_path = mdp.noise_stage(t) && step.uniform_shift() &&
                           build_post_tables(mdp, shape, t, vnext, hnext, opts.threads, pt);

    parallel_for(g.num_states(), opts.threads, [&](std::size_t p) {
      const int s = g.states[p];
      const auto adm = mdp.admissible(s);
      const std::size_t na = adm.size();
      std::vector<double> q(na * ny, 0.0);
      std::vector<std::vector<Succ>> outs(na);
      double snap = 0.0;

      for (std::size_t k = 0; k < na; ++k) {
        const std::size_t pr = mdp.pair(s, static_cast<int>(k));
        double* qk = q.data() + k * ny;
        if (post_path) {
          const auto& noise = std::get<NoiseStage>(mdp.stage(t));
          const double c = noise.decision_reward[pr];
          const double* w = pt.w.data() + static_cast<std::size_t>(pt.post_pos[noise.post[pr]]) * pt.nz +
                            (g.ns.front() - pt.kc[pr] - pt.z_front);
          for (std::size_t i = 0; i < ny; ++i) qk[i] = c + w[i];
          continue;
        }
        step.outcomes(pr, outs[k]);
        auto& os = outs[k];
        os.erase(std::remove_if(os.begin(), os.end(), [](const Succ& o) { return o.prob <= 0; }), os.end());
        if (step.uniform_shift()) {
          for (const Succ& o : os) {
            if (o.pos < 0) {
              std::fill(qk, qk + ny, kNaN);
              break;
            }
            const std::int64_t sh = step.shift(o.dk);
            const std::int64_t lo = std::max<std::int64_t>(0, -sh);
            const std::int64_t hi = std::min<std::int64_t>(ny, static_cast<std::int64_t>(nyn) - sh);
            const double* v = vnext.data() + static_cast<std::size_t>(o.pos) * nyn + sh;
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(ny); ++i)
              qk[i] = (i < lo || i >= hi) ? kNaN : qk[i] + o.prob * (o.reward + v[i]);
          }
        } else {
          for (std::size_t i = 0; i < ny; ++i) {
            double acc = 0.0;
            for (const Succ& o : os) {
              auto c = step.next_cell(i, o);
              if (!c) {
                acc = kNaN;
                break;
              }
              if (shape.mode == LatticeMode::quantized) snap = std::max(snap, step.snap_distance(i, o, *c % nyn));
              acc += o.prob * (o.reward + vnext[*c]);
            }
            qk[i] = acc;
          }
        }
      }

      for (std::size_t i = 0; i < ny; ++i) {
        const std::size_t cell = p * ny + i;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < na; ++k)
          if (q[k * ny + i] > best) best = q[k * ny + i];
        if (!std::isfinite(best)) continue;
        const double floor = best - opts.eps_tie;
        int count = 0, chosen = -1, chosen_k = -1;
        for (std::size_t k = 0; k < na; ++k)
          if (q[k * ny + i] >= floor) {
            ++count;
            if (chosen < 0 || adm[k] < chosen) {
              chosen = adm[k];
              chosen_k = static_cast<int>(k);
            }
          }
        if (inc && count > 1) {
          std::optional<int> ia;
          if (inc_same_shape) {
            const int a = inc->action_at(t, cell);
            if (a >= 0) ia = a;
          } else {
            ia = inc->action(t, s, inc->root() + g.offsets[i]);
          }
          if (ia) {
            const int slot = mdp.action_slot(s, *ia);
            if (slot >= 0 && q[slot * ny + i] >= floor) {
              chosen = *ia;
              chosen_k = slot;
            }
          }
        }
        vout[cell] = best;
        aout[cell] = chosen;
        tout[cell] = static_cast<std::uint8_t>(std::min(count, 255));
        if (opts.fingerprints) {
          std::uint64_t children = 0;
          const std::size_t pr = mdp.pair(s, chosen_k);
          if (post_path) {
            const auto& noise = std::get<NoiseStage>(mdp.stage(t));
            children = pt.hw[static_cast<std::size_t>(pt.post_pos[noise.post[pr]]) * pt.nz +
                             static_cast<std::size_t>(static_cast<std::int64_t>(i) + g.ns.front() - pt.kc[pr] - pt.z_front)];
          } else {
            for (const Succ& o : outs[chosen_k]) {
              auto c = step.next_cell(i, o);
              if (c) children += detail::outcome_hash(o.index, (*hnext)[*c]);
            }
          }
          sol.hash_[t][cell] = detail::cell_hash(t, s, chosen, children);
        }
      }
      if (snap > 0) {
        std::lock_guard<std::mutex> lock(snap_mu);
        sol.max_snap_ = std::max(sol.max_snap_, snap);
      }
    });

    if (!opts.keep_tables) {
      std::vector<double>().swap(sol.value_[t + 1]);
      if (opts.fingerprints) std::vector<std::uint64_t>().swap(sol.hash_[t + 1]);
      if (t + 1 < T) {
        std::vector<std::int32_t>().swap((*sol.actions_)[t + 1]);
        std::vector<std::uint8_t>().swap(sol.ties_[t + 1]);
      }
    }
  }
  return sol;
}

AugmentedSolution backward_induction(const TabularMdp& mdp, int s0, double y0, const InnerOptions& opts,
                                     const LatticeOptions& lattice_opts) {
  return solve_on_lattice(mdp, reachable_lattice(mdp, s0, y0, lattice_opts), opts);
}

AugmentedSolution quantized_backward_induction(const TabularMdp& mdp, int s0, double y0, double dy,
                                               const InnerOptions& opts, const LatticeOptions& lattice_opts) {
  auto shape = build_quantized_shape(mdp, {s0}, 0.0, 0.0, dy, lattice_opts);
  return solve_on_lattice(mdp, YLattice(shape, y0), opts);
}

}  // namespace mvmdp
