#include "mvmdp/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mvmdp/error.hpp"

namespace mvmdp {

namespace {

int grid_count(double extent, double delta, const char* what) {
  const double n = extent / delta;
  const double r = std::round(n);
  if (r < 1 || std::abs(n - r) > 1e-9 * std::max(1.0, n))
    throw ConfigError(std::string(what) + " is not a positive multiple of delta");
  return static_cast<int>(r);
}

}  // namespace

TabularMdp build_queueing(const QueueingParams& p) {
  if (!(p.delta > 0)) throw ConfigError("queueing: delta must be positive");
  if (!(p.arrival_prob > 0 && p.arrival_prob < 1)) throw ConfigError("queueing: arrival probability must lie in (0,1)");
  if (p.horizon < 1) throw ConfigError("queueing: horizon must be positive");
  const int ns = grid_count(p.capacity, p.delta, "capacity") + 1;
  const int na = grid_count(p.max_service, p.delta, "max service") + 1;
  const int nx = grid_count(p.max_arrival, p.delta, "max arrival");
  if (ns > p.max_states) throw ConfigError("queueing: " + std::to_string(ns) + " states exceed the limit");

  MdpData d;
  d.horizon = p.horizon;
  d.num_states = ns;
  d.num_actions = na;
  d.lambda = p.lambda;
  d.meta.name = "queueing";
  d.meta.linear_convex = true;
  for (int i = 0; i < ns; ++i) d.meta.state_values.push_back(i * p.delta);
  std::vector<int> all(na);
  for (int a = 0; a < na; ++a) all[a] = a;
  d.admissible.assign(ns, all);

  NoiseStage st;
  st.num_post = ns;
  for (int s = 0; s < ns; ++s)
    for (int a = 0; a < na; ++a) {
      st.post.push_back(std::max(s - a, 0));
      st.decision_reward.push_back(-p.operating_cost * (a * p.delta));
    }
  for (int k = 0; k <= nx; ++k) {
    NoiseAtom at;
    at.prob = k == 0 ? 1.0 - p.arrival_prob : p.arrival_prob / nx;
    at.next.resize(ns);
    at.reward.resize(ns);
    for (int m = 0; m < ns; ++m) {
      at.next[m] = std::min(m + k, ns - 1);
      at.reward[m] = -p.holding_cost * (at.next[m] * p.delta);
    }
    st.atoms.push_back(std::move(at));
  }
  d.stages.assign(p.horizon, st);
  return TabularMdp(std::move(d));
}

TabularMdp build_inventory(const InventoryParams& p) {
  if (p.capacity < 1 || p.horizon < 1) throw ConfigError("inventory: capacity and horizon must be positive");
  if (p.order_cost < 1 || p.holding_cost < 1 || !(p.shortage_cost > p.order_cost && p.revenue > p.order_cost))
    throw ConfigError("inventory: requires positive costs with c_s > c_o and p_r > c_o");
  const int S = p.capacity;
  MdpData d;
  d.horizon = p.horizon;
  d.num_states = S + 1;
  d.num_actions = S + 1;
  d.lambda = p.lambda;
  d.meta.name = "inventory";
  for (int s = 0; s <= S; ++s) {
    d.meta.state_values.push_back(s);
    std::vector<int> adm;
    for (int a = 0; a <= S - s; ++a) adm.push_back(a);
    d.admissible.push_back(std::move(adm));
  }
  NoiseStage st;
  st.num_post = S + 1;
  for (int s = 0; s <= S; ++s)
    for (int a = 0; a <= S - s; ++a) {
      st.post.push_back(s + a);
      st.decision_reward.push_back(-p.order_cost * a);
    }
  for (int xi = 0; xi <= S; ++xi) {
    NoiseAtom at;
    at.prob = 1.0 / (S + 1);
    for (int m = 0; m <= S; ++m) {
      const int left = std::max(m - xi, 0);
      const int short_ = std::max(xi - m, 0);
      at.next.push_back(left);
      at.reward.push_back(p.revenue * xi - p.holding_cost * left - p.shortage_cost * short_);
    }
    st.atoms.push_back(std::move(at));
  }
  d.stages.assign(p.horizon, st);
  return TabularMdp(std::move(d));
}

TabularMdp build_random(std::uint64_t seed, const RandomSizes& z) {
  if (z.num_states < 1 || z.num_actions < 1 || z.horizon < 1 || z.reward_grid.empty())
    throw ConfigError("random model: sizes must be positive");
  if (static_cast<long>(z.num_states) * z.num_actions * z.horizon > z.max_cells)
    throw ConfigError("random model exceeds the size cap");
  std::mt19937_64 rng(seed);
  auto uniform_int = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };

  MdpData d;
  d.horizon = z.horizon;
  d.num_states = z.num_states;
  d.num_actions = z.num_actions;
  d.lambda = z.lambda;
  d.meta.name = "random";
  for (int s = 0; s < z.num_states; ++s) {
    std::vector<int> adm;
    for (int a = 0; a < z.num_actions; ++a)
      if (!z.random_admissible || uniform_int(3) != 0) adm.push_back(a);
    if (adm.empty()) adm.push_back(uniform_int(z.num_actions));
    d.admissible.push_back(std::move(adm));
  }
  for (int t = 0; t < z.horizon; ++t) {
    KernelStage k;
    for (int s = 0; s < z.num_states; ++s)
      for (std::size_t kk = 0; kk < d.admissible[s].size(); ++kk) {
        std::vector<int> w(z.num_states);
        int total = 0;
        for (auto& x : w) total += (x = uniform_int(4));
        if (total == 0) w[uniform_int(z.num_states)] = total = 1;
        std::vector<KernelEntry> row;
        for (int s2 = 0; s2 < z.num_states; ++s2)
          if (w[s2] > 0) row.push_back({s2, static_cast<double>(w[s2]) / total});
        k.rows.push_back(std::move(row));
        k.reward.push_back(z.reward_grid[uniform_int(static_cast<int>(z.reward_grid.size()))]);
      }
    d.stages.emplace_back(std::move(k));
  }
  return TabularMdp(std::move(d));
}

QueueingParams queueing_params_from_json(const nlohmann::json& j) {
  QueueingParams p;
  p.horizon = j.value("T", p.horizon);
  p.capacity = j.value("S", p.capacity);
  p.max_service = j.value("A", p.max_service);
  p.max_arrival = j.value("X", p.max_arrival);
  p.arrival_prob = j.value("q", p.arrival_prob);
  p.operating_cost = j.value("c_o", p.operating_cost);
  p.holding_cost = j.value("c_h", p.holding_cost);
  p.delta = j.value("delta", p.delta);
  p.lambda = j.value("lambda", p.lambda);
  return p;
}

InventoryParams inventory_params_from_json(const nlohmann::json& j) {
  InventoryParams p;
  p.horizon = j.value("T", p.horizon);
  p.capacity = j.value("S", p.capacity);
  p.revenue = j.value("p_r", p.revenue);
  p.order_cost = j.value("c_o", p.order_cost);
  p.holding_cost = j.value("c_h", p.holding_cost);
  p.shortage_cost = j.value("c_s", p.shortage_cost);
  p.lambda = j.value("lambda", p.lambda);
  return p;
}

}  // namespace mvmdp
