#include "mvmdp/policy.hpp"

#include <algorithm>
#include <cmath>

#include "mvmdp/error.hpp"
#include "stage_step.hpp"

namespace mvmdp {

inline constexpr const char* kPolicySchema = "mvmdp-policy/1";

std::optional<int> AugmentedPolicy::action(int t, int s, double y) const {
  if (t < 0 || t >= horizon()) return std::nullopt;
  auto c = lattice_.cell(t, s, y);
  if (!c) return std::nullopt;
  const int a = (*actions_)[t][*c];
  if (a < 0) return std::nullopt;
  return a;
}

AugmentedPolicy AugmentedPolicy::with_action(int t, std::size_t cell, int a) const {
  auto copy = std::make_shared<ActionTables>(*actions_);
  (*copy)[t][cell] = a;
  return AugmentedPolicy(lattice_, std::move(copy));
}

std::vector<std::vector<std::size_t>> reachable_cells(const TabularMdp& mdp, const AugmentedPolicy& policy, int s0) {
  const int T = mdp.horizon();
  const YLattice& lat = policy.lattice();
  const LatticeShape& shape = lat.shape();
  std::vector<std::vector<std::size_t>> out(T + 1);
  auto root = lat.cell(0, s0, lat.base());
  if (!root) throw SolverError("policy lattice has no root cell for state " + std::to_string(s0));
  out[0].push_back(*root);
  std::vector<detail::Succ> buf;
  for (int t = 0; t < T; ++t) {
    const StageGrid& g = shape.stages[t];
    std::vector<char> mark(shape.stages[t + 1].cells(), 0);
    detail::StageStep step(mdp, shape, t);
    for (std::size_t cell : out[t]) {
      const int s = g.states[cell / g.num_ys()];
      const int a = policy.action_at(t, cell);
      const int slot = a < 0 ? -1 : mdp.action_slot(s, a);
      if (slot < 0)
        throw SolverError("policy undefined at (t=" + std::to_string(t) + ", s=" + std::to_string(s) +
                          ", y=" + std::to_string(lat.y(t, cell % g.num_ys())) + ")");
      step.outcomes(mdp.pair(s, slot), buf);
      for (const auto& o : buf) {
        if (o.prob <= 0) continue;
        auto c = step.next_cell(cell % g.num_ys(), o);
        if (!c) throw SolverError("successor outside the policy lattice at stage " + std::to_string(t + 1));
        mark[*c] = 1;
      }
    }
    for (std::size_t c = 0; c < mark.size(); ++c)
      if (mark[c]) out[t + 1].push_back(c);
  }
  return out;
}

bool same_on_common_support(const TabularMdp& mdp, const AugmentedPolicy& a, const AugmentedPolicy& b, int s0) {
  const auto ra = reachable_cells(mdp, a, s0);
  const bool shared = a.lattice().shape_ptr() == b.lattice().shape_ptr();
  const auto rb = reachable_cells(mdp, b, s0);
  for (int t = 0; t < mdp.horizon(); ++t) {
    const StageGrid& ga = a.lattice().stage(t);
    for (std::size_t cell : ra[t]) {
      std::optional<std::size_t> cb;
      if (shared) {
        cb = cell;
      } else {
        const int s = ga.states[cell / ga.num_ys()];
        cb = b.lattice().cell(t, s, b.root() + ga.offsets[cell % ga.num_ys()]);
      }
      if (!cb || !std::binary_search(rb[t].begin(), rb[t].end(), *cb)) continue;
      if (a.action_at(t, cell) != b.action_at(t, *cb)) return false;
    }
  }
  return true;
}

nlohmann::json policy_to_json(const TabularMdp& mdp, const AugmentedPolicy& policy, int s0) {
  const auto reach = reachable_cells(mdp, policy, s0);
  const YLattice& lat = policy.lattice();
  nlohmann::json cells = nlohmann::json::array();
  for (int t = 0; t <= mdp.horizon(); ++t) {
    const StageGrid& g = lat.stage(t);
    for (std::size_t c : reach[t]) {
      const int a = t < mdp.horizon() ? policy.action_at(t, c) : -1;
      cells.push_back(nlohmann::json::array({t, g.states[c / g.num_ys()], lat.y(t, c % g.num_ys()), a}));
    }
  }
  return {{"schema", kPolicySchema}, {"s0", s0}, {"y0", policy.root()}, {"horizon", mdp.horizon()}, {"cells", cells}};
}

AugmentedPolicy policy_from_json(const nlohmann::json& doc) {
  try {
    if (doc.value("schema", std::string()) != kPolicySchema) throw ConfigError("policy document has wrong schema");
    const int T = doc.at("horizon").get<int>();
    const double y0 = doc.at("y0").get<double>();
    if (T < 1) throw ConfigError("policy horizon must be positive");
    struct Row {
      int t, s;
      double off;
      int a;
    };
    std::vector<Row> rows;
    int max_state = 0;
    for (const auto& c : doc.at("cells")) {
      Row r{c.at(0).get<int>(), c.at(1).get<int>(), c.at(2).get<double>() - y0, c.at(3).get<int>()};
      if (r.t < 0 || r.t > T || r.s < 0) throw ConfigError("policy cell out of range");
      max_state = std::max(max_state, r.s);
      rows.push_back(r);
    }
    auto shape = std::make_shared<LatticeShape>();
    shape->mode = LatticeMode::sparse;
    shape->stages.resize(T + 1);
    for (int t = 0; t <= T; ++t) {
      StageGrid& g = shape->stages[t];
      std::vector<int> states;
      std::vector<double> offs;
      for (const Row& r : rows)
        if (r.t == t) {
          states.push_back(r.s);
          offs.push_back(r.off);
        }
      std::sort(states.begin(), states.end());
      states.erase(std::unique(states.begin(), states.end()), states.end());
      std::sort(offs.begin(), offs.end());
      std::size_t w = 0;
      for (std::size_t i = 0; i < offs.size(); ++i)
        if (w == 0 || offs[i] - offs[w - 1] > shape->tau) offs[w++] = offs[i];
      offs.resize(w);
      g.states = states;
      g.state_pos.assign(max_state + 1, -1);
      for (std::size_t i = 0; i < states.size(); ++i) g.state_pos[states[i]] = static_cast<int>(i);
      g.offsets = offs;
      shape->total_cells += g.cells();
    }
    auto tables = std::make_shared<ActionTables>(T);
    for (int t = 0; t < T; ++t) (*tables)[t].assign(shape->stages[t].cells(), -1);
    YLattice lat(shape, y0);
    for (const Row& r : rows) {
      if (r.t == T) continue;
      auto c = lat.cell(r.t, r.s, y0 + r.off);
      (*tables)[r.t][*c] = r.a;
    }
    return AugmentedPolicy(lat, tables);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed policy document: ") + e.what());
  }
}

}  // namespace mvmdp
