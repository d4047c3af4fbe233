#include "mvmdp/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "mvmdp/error.hpp"

namespace mvmdp {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(12);
  os << x;
  return os.str();
}

}  // namespace

TabularMdp::TabularMdp(MdpData data) : d_(std::move(data)) {
  pair_offset_.assign(d_.admissible.size() + 1, 0);
  for (std::size_t s = 0; s < d_.admissible.size(); ++s)
    pair_offset_[s + 1] = pair_offset_[s] + d_.admissible[s].size();

  r_min_ = std::numeric_limits<double>::infinity();
  r_max_ = -r_min_;
  for (const Stage& st : d_.stages) {
    if (const auto* k = std::get_if<KernelStage>(&st)) {
      for (double r : k->reward) {
        r_min_ = std::min(r_min_, r);
        r_max_ = std::max(r_max_, r);
      }
    } else {
      const auto& n = std::get<NoiseStage>(st);
      for (std::size_t p = 0; p < n.post.size(); ++p) {
        const int m = n.post[p];
        if (m < 0 || m >= n.num_post) continue;
        for (const auto& at : n.atoms) {
          if (static_cast<std::size_t>(m) >= at.reward.size()) continue;
          const double r = n.decision_reward[p] + at.reward[m];
          r_min_ = std::min(r_min_, r);
          r_max_ = std::max(r_max_, r);
        }
      }
    }
  }
  if (r_min_ > r_max_) r_min_ = r_max_ = 0.0;
}

int TabularMdp::action_slot(int s, int a) const {
  const auto& adm = d_.admissible[s];
  auto it = std::find(adm.begin(), adm.end(), a);
  return it == adm.end() ? -1 : static_cast<int>(it - adm.begin());
}

double TabularMdp::expected_reward(int t, std::size_t pr) const {
  double sum = 0.0;
  for_each_outcome(t, pr, [&](std::size_t, double p, int, double r) { sum += p * r; });
  return sum;
}

std::vector<KernelEntry> TabularMdp::marginal_row(int t, std::size_t pr) const {
  std::map<int, double> acc;
  for_each_outcome(t, pr, [&](std::size_t, double p, int next, double) { acc[next] += p; });
  std::vector<KernelEntry> row;
  for (auto [s, p] : acc) row.push_back({s, p});
  return row;
}

TabularMdp TabularMdp::with_lambda(double lambda) const {
  MdpData d = d_;
  d.lambda = lambda;
  return TabularMdp(std::move(d));
}

ValidationReport validate(const TabularMdp& mdp) {
  ValidationReport rep;
  auto& v = rep.violations;
  const MdpData& d = mdp.data();
  if (d.horizon < 1) v.push_back("horizon " + std::to_string(d.horizon) + " < 1");
  if (!(d.lambda >= 0.0)) v.push_back("lambda " + fmt(d.lambda) + " < 0");
  if (d.num_states < 1) v.push_back("no states");
  if (d.num_actions < 1) v.push_back("no actions");
  if (static_cast<int>(d.admissible.size()) != d.num_states) {
    v.push_back("admissible table has " + std::to_string(d.admissible.size()) + " rows, expected " +
                std::to_string(d.num_states));
    return rep;
  }
  for (int s = 0; s < d.num_states; ++s) {
    const auto& adm = d.admissible[s];
    if (adm.empty()) v.push_back("A(" + std::to_string(s) + ") empty");
    for (int a : adm)
      if (a < 0 || a >= d.num_actions)
        v.push_back("A(" + std::to_string(s) + ") contains " + std::to_string(a) + " outside A");
    auto sorted = adm;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      v.push_back("A(" + std::to_string(s) + ") has duplicates");
  }
  if (static_cast<int>(d.stages.size()) != d.horizon) {
    v.push_back(std::to_string(d.stages.size()) + " stages for horizon " + std::to_string(d.horizon));
    return rep;
  }
  const std::size_t pairs = mdp.num_pairs();
  auto where = [](int t, int s, int a) {
    return "stage " + std::to_string(t) + " state " + std::to_string(s) + " action " + std::to_string(a) + ": ";
  };
  for (int t = 0; t < d.horizon; ++t) {
    const Stage& st = d.stages[t];
    if (const auto* k = std::get_if<KernelStage>(&st)) {
      if (k->rows.size() != pairs || k->reward.size() != pairs) {
        v.push_back("stage " + std::to_string(t) + ": kernel/reward size mismatch");
        continue;
      }
    } else {
      const auto& n = std::get<NoiseStage>(st);
      if (n.post.size() != pairs || n.decision_reward.size() != pairs) {
        v.push_back("stage " + std::to_string(t) + ": post map size mismatch");
        continue;
      }
      if (n.atoms.empty()) v.push_back("stage " + std::to_string(t) + ": no noise atoms");
      bool bad = false;
      for (const auto& at : n.atoms) {
        if (static_cast<int>(at.next.size()) != n.num_post || static_cast<int>(at.reward.size()) != n.num_post)
          bad = true;
        for (int s2 : at.next)
          if (s2 < 0 || s2 >= d.num_states) bad = true;
      }
      for (int m : n.post)
        if (m < 0 || m >= n.num_post) bad = true;
      if (bad) {
        v.push_back("stage " + std::to_string(t) + ": malformed noise atoms");
        continue;
      }
    }
    for (int s = 0; s < d.num_states; ++s) {
      const auto& adm = d.admissible[s];
      for (std::size_t kk = 0; kk < adm.size(); ++kk) {
        const std::size_t pr = mdp.pair(s, static_cast<int>(kk));
        double mass = 0.0;
        bool negative = false, out_of_range = false, nonfinite = false;
        mdp.for_each_outcome(t, pr, [&](std::size_t, double p, int next, double r) {
          if (p < 0) negative = true;
          if (next < 0 || next >= d.num_states) out_of_range = true;
          if (!std::isfinite(p) || !std::isfinite(r)) nonfinite = true;
          mass += p;
        });
        if (negative) v.push_back(where(t, s, adm[kk]) + "negative probability");
        if (out_of_range) v.push_back(where(t, s, adm[kk]) + "successor outside S");
        if (nonfinite) v.push_back(where(t, s, adm[kk]) + "non-finite entry");
        if (std::abs(mass - 1.0) > 1e-12) v.push_back(where(t, s, adm[kk]) + "row mass " + fmt(mass) + " ≠ 1");
      }
    }
  }
  return rep;
}

Interval pseudo_mean_domain(const TabularMdp& mdp) {
  return {mdp.horizon() * mdp.reward_min(), mdp.horizon() * mdp.reward_max()};
}

Interval reachable_pseudo_mean_domain(const TabularMdp& mdp, int s0) {
  std::vector<char> cur(mdp.num_states(), 0), nxt;
  cur[s0] = 1;
  double lo = 0.0, hi = 0.0;
  for (int t = 0; t < mdp.horizon(); ++t) {
    nxt.assign(mdp.num_states(), 0);
    double rlo = std::numeric_limits<double>::infinity(), rhi = -rlo;
    for (int s = 0; s < mdp.num_states(); ++s) {
      if (!cur[s]) continue;
      for (std::size_t k = 0; k < mdp.admissible(s).size(); ++k)
        mdp.for_each_outcome(t, mdp.pair(s, static_cast<int>(k)), [&](std::size_t, double p, int next, double r) {
          if (p <= 0) return;
          nxt[next] = 1;
          rlo = std::min(rlo, r);
          rhi = std::max(rhi, r);
        });
    }
    lo += rlo;
    hi += rhi;
    cur.swap(nxt);
  }
  return {lo, hi};
}

std::vector<std::vector<int>> myopic_policy(const TabularMdp& mdp) {
  std::vector<std::vector<int>> u(mdp.horizon(), std::vector<int>(mdp.num_states()));
  for (int t = 0; t < mdp.horizon(); ++t)
    for (int s = 0; s < mdp.num_states(); ++s) {
      const auto adm = mdp.admissible(s);
      int best = adm[0];
      double best_r = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < adm.size(); ++k) {
        const double r = mdp.expected_reward(t, mdp.pair(s, static_cast<int>(k)));
        if (r > best_r + 1e-12 || (std::abs(r - best_r) <= 1e-12 && adm[k] < best)) {
          best_r = std::max(r, best_r);
          best = adm[k];
        }
      }
      u[t][s] = best;
    }
  return u;
}

double markov_policy_mean(const TabularMdp& mdp, const std::vector<std::vector<int>>& actions, int s0) {
  std::vector<double> v(mdp.num_states(), 0.0), nv(mdp.num_states());
  for (int t = mdp.horizon() - 1; t >= 0; --t) {
    for (int s = 0; s < mdp.num_states(); ++s) {
      const int k = mdp.action_slot(s, actions[t][s]);
      double q = 0.0;
      mdp.for_each_outcome(t, mdp.pair(s, k), [&](std::size_t, double p, int next, double r) { q += p * (r + v[next]); });
      nv[s] = q;
    }
    v.swap(nv);
  }
  return v[s0];
}

}  // namespace mvmdp
