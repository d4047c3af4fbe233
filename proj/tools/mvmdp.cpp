#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mvmdp/augmented_dp.hpp"
#include "mvmdp/diagnostics.hpp"
#include "mvmdp/error.hpp"
#include "mvmdp/format.hpp"
#include "mvmdp/grid_oracle.hpp"
#include "mvmdp/model_io.hpp"
#include "mvmdp/models.hpp"
#include "mvmdp/policy_eval.hpp"
#include "mvmdp/portfolio.hpp"
#include "mvmdp/reproduce.hpp"
#include "mvmdp/solver.hpp"

using namespace mvmdp;
using nlohmann::json;

namespace {

struct ModelArgs {
  std::string path;
  std::string builtin;
  std::string params;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// Inline JSON text or a path to a JSON file.
json params_json(const std::string& s) {
  if (s.empty()) return json::object();
  if (s.front() == '{') {
    try {
      return json::parse(s);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("bad --params: ") + e.what());
    }
  }
  return read_json_file(s);
}

TabularMdp builtin_model(const std::string& name, const json& params) {
  if (name == "queueing") return build_queueing(queueing_params_from_json(params));
  if (name == "inventory") return build_inventory(inventory_params_from_json(params));
  throw ConfigError("unknown model '" + name + "' (queueing, inventory)");
}

TabularMdp load(const ModelArgs& m) {
  if (m.path.empty() == m.builtin.empty()) throw ConfigError("give exactly one of --model and --builtin");
  TabularMdp mdp = m.path.empty() ? builtin_model(m.builtin, params_json(m.params)) : load_model(m.path);
  const auto rep = validate(mdp);
  if (!rep.ok()) {
    std::string msg = "invalid model:";
    for (const auto& v : rep.violations) msg += "\n  " + v;
    throw ModelError(msg);
  }
  return mdp;
}

void add_model_options(CLI::App* sub, ModelArgs& m) {
  sub->add_option("--model", m.path, "model JSON document");
  sub->add_option("--builtin", m.builtin, "built-in model: queueing | inventory");
  sub->add_option("--params", m.params, "parameters for --builtin (inline JSON or file)");
}

void emit(const json& j, const std::string& out) {
  const std::string text = j.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out);
  if (!f) throw ConfigError("cannot write " + out);
  f << text;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  return f;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad number '" + item + "' in list '" + s + "'");
    }
  }
  return out;
}

void check_state(const TabularMdp& mdp, int s0) {
  if (s0 < 0 || s0 >= mdp.num_states())
    throw ConfigError("s0 = " + std::to_string(s0) + " outside 0.." + std::to_string(mdp.num_states() - 1));
}

void positive(double x, const char* name) {
  if (!(x > 0)) throw ConfigError(std::string(name) + " must be positive");
}

json eval_json(const EvalResult& e) {
  return {{"y0", sig12(e.y0)},         {"mean", sig12(e.mean)}, {"variance", sig12(e.variance)},
          {"second_moment", sig12(e.second_moment)}, {"J", sig12(e.mv)},     {"J_hat", sig12(e.pseudo_mv)}};
}

std::string hex(std::uint64_t x) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

const char* mode_name(LatticeMode m) {
  switch (m) {
    case LatticeMode::integral: return "integral";
    case LatticeMode::sparse: return "sparse";
    case LatticeMode::quantized: return "quantized";
  }
  return "?";
}

json lattice_json(const YLattice& lat) {
  const LatticeShape& sh = lat.shape();
  json stages = json::array();
  for (const auto& g : sh.stages) stages.push_back({{"states", g.num_states()}, {"ys", g.num_ys()}});
  return {{"mode", mode_name(sh.mode)}, {"quantum", sig12(sh.quantum)}, {"cells", sh.total_cells}, {"stages", stages}};
}

json solve_json(const SolveReport& r) {
  json trace = json::array();
  for (const auto& it : r.trace)
    trace.push_back({{"k", it.k}, {"y", sig12(it.y)}, {"J", sig12(it.J)}, {"J_hat", sig12(it.J_hat)},
                     {"mean", sig12(it.mean)}, {"fingerprint", hex(it.fingerprint)}});
  json events = json::array();
  for (const auto& e : r.events)
    events.push_back({{"iteration", e.iteration}, {"tied_cells", e.tied_cells}, {"candidates", e.candidates},
                      {"improved", e.improved}, {"gain", sig12(e.gain)}});
  json j = {{"s0", r.s0}, {"y0_init", sig12(r.y0_init)}, {"status", to_string(r.status)},
            {"converged", r.converged()}, {"iterations", r.trace.size()}, {"trace", trace}, {"break_points", events}};
  if (r.has_policy) {
    j["y_star"] = sig12(r.y_star);
    j["eval"] = eval_json(r.eval);
  }
  return j;
}

void write_trace_csv(std::ostream& os, const SolveReport& r, bool header) {
  if (header) os << "y0_init,k,y,J,J_hat,mean\n";
  for (const auto& it : r.trace)
    os << fmt12(r.y0_init) << ',' << it.k << ',' << fmt12(it.y) << ',' << fmt12(it.J) << ',' << fmt12(it.J_hat) << ','
       << fmt12(it.mean) << '\n';
}

json curve_summary(const PseudoMeanCurve& c, const SegmentReport& seg) {
  json maxima = json::array();
  for (const auto& m : c.maxima)
    maxima.push_back({{"index", m.index}, {"y", sig12(m.y)}, {"value", sig12(m.value)}, {"global", m.is_global}});
  return {{"s0", c.s0},
          {"h", sig12(c.h)},
          {"points", c.points.size()},
          {"y_star", sig12(c.y_star)},
          {"J_star", sig12(c.J_star)},
          {"local_maxima", maxima},
          {"segments", seg.segments},
          {"segment_check", {{"checked", seg.checked}, {"max_relative_error", sig12(seg.max_relative_error)},
                             {"violations", seg.violations.size()}}}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-horizon mean-variance MDP solver"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = default_threads();
  app.add_option("--threads", threads, "worker threads (default: MVMDP_THREADS or 1)")->check(CLI::PositiveNumber);
  std::string out;
  app.add_option("--out", out, "write the JSON result here instead of stdout");

  // models emit
  auto* models = app.add_subcommand("models", "emit built-in model documents");
  auto* emit_cmd = models->add_subcommand("emit", "write the JSON model document");
  models->require_subcommand(1);
  std::string emit_name, emit_params;
  emit_cmd->add_option("--name", emit_name, "queueing | inventory")->required();
  emit_cmd->add_option("--params", emit_params, "parameters (inline JSON or file)");

  ModelArgs model;
  int s0 = 0;
  double y0 = 0.0;
  double eps_tie = 1e-9, eps_fix = 1e-7;

  // inner-solve
  auto* inner = app.add_subcommand("inner-solve", "optimal pseudo mean-variance policy at a fixed y0");
  add_model_options(inner, model);
  inner->add_option("--s0", s0)->required();
  inner->add_option("--y0", y0)->required();
  std::optional<double> quantize;
  inner->add_option("--quantize", quantize, "pseudo-mean grid step");
  inner->add_option("--eps-tie", eps_tie);
  std::string policy_out;
  inner->add_option("--policy-out", policy_out, "write the policy document here");
  bool with_policy = false;
  inner->add_flag("--with-policy", with_policy, "embed the policy document in the output");

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "iterative mean-variance solve");
  add_model_options(solve_cmd, model);
  solve_cmd->add_option("--s0", s0)->required();
  std::optional<double> y0_init;
  std::string multi;
  auto* y0_opt = solve_cmd->add_option("--y0-init", y0_init);
  solve_cmd->add_option("--multi-start", multi, "comma-separated initial pseudo means")->excludes(y0_opt);
  int max_iters = 100;
  solve_cmd->add_option("--max-iters", max_iters)->check(CLI::NonNegativeNumber);
  solve_cmd->add_option("--eps-fix", eps_fix);
  solve_cmd->add_option("--eps-tie", eps_tie);
  solve_cmd->add_option("--quantize", quantize, "pseudo-mean grid step");
  bool no_escape = false;
  solve_cmd->add_flag("--no-escape", no_escape, "disable break-point escape");
  std::string trace_csv;
  solve_cmd->add_option("--trace-csv", trace_csv, "CSV of (y0_init, k, y, J, J_hat, mean) rows");
  solve_cmd->add_option("--policy-out", policy_out, "write the best policy document here");

  // grid
  auto* grid = app.add_subcommand("grid", "pseudo-mean grid sweep");
  add_model_options(grid, model);
  std::string s0_list;
  grid->add_option("--s0", s0_list, "initial state or comma-separated list")->required();
  std::optional<double> from, to;
  double step = 0.1;
  grid->add_option("--from", from);
  grid->add_option("--to", to);
  grid->add_option("--step", step);
  std::string csv;
  grid->add_option("--csv", csv, "CSV of (s0, y0, J_hat, fingerprint, segment_id) rows");
  bool per_point = false;
  grid->add_flag("--per-point", per_point, "solve each grid point on its own lattice");
  grid->add_option("--eps-tie", eps_tie);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "exact and simulated evaluation of a policy");
  add_model_options(eval_cmd, model);
  std::string policy_path;
  eval_cmd->add_option("--policy", policy_path)->required();
  eval_cmd->add_option("--s0", s0)->required();
  std::optional<double> eval_y0;
  eval_cmd->add_option("--y0", eval_y0, "history root (default: the policy root)");
  std::vector<std::uint64_t> simulate_args;
  eval_cmd->add_option("--simulate", simulate_args, "n seed")->expected(2);

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "difference and derivative formulas for a policy pair");
  add_model_options(diag, model);
  std::string pa, pb;
  diag->add_option("--policy-a", pa)->required();
  diag->add_option("--policy-b", pb)->required();
  diag->add_option("--s0", s0)->required();
  std::optional<double> diag_y0;
  diag->add_option("--y0", diag_y0, "history root for both policies (default: each policy's own root)");

  // portfolio
  auto* pf = app.add_subcommand("portfolio", "closed-form multi-period portfolio");
  std::string spec_path, curve;
  pf->add_option("--spec", spec_path, "portfolio spec JSON (default: the three-asset example)");
  std::optional<double> pf_s0;
  pf->add_option("--s0", pf_s0);
  pf->add_option("--curve", curve, "from,to,step for the optimal pseudo mean-variance curve");
  pf->add_option("--csv", csv, "CSV of (y, J_hat) rows for --curve");

  // reproduce
  auto* rep_cmd = app.add_subcommand("reproduce", "run an experiment recipe and check it");
  std::string experiment;
  rep_cmd->add_option("experiment", experiment, "portfolio-ex1 | queueing | inventory")->required();
  std::uint64_t seed = 0;
  rep_cmd->add_option("--seed", seed);
  std::size_t paths = 1'000'000;
  rep_cmd->add_option("--paths", paths, "Monte Carlo paths (portfolio-ex1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::config);
  }

  try {
    positive(eps_tie, "--eps-tie");
    positive(eps_fix, "--eps-fix");
    if (quantize) positive(*quantize, "--quantize");

    if (models->parsed()) {
      emit(model_to_json(builtin_model(emit_name, params_json(emit_params))), out);
      return 0;
    }

    if (inner->parsed()) {
      const TabularMdp mdp = load(model);
      check_state(mdp, s0);
      InnerOptions io;
      io.eps_tie = eps_tie;
      io.threads = threads;
      const AugmentedSolution sol =
          quantize ? quantized_backward_induction(mdp, s0, y0, *quantize, io) : backward_induction(mdp, s0, y0, io);
      const AugmentedPolicy pol = sol.policy();
      const json pdoc = policy_to_json(mdp, pol, s0);
      json j = {{"s0", s0},
                {"y0", sig12(y0)},
                {"value", sig12(sol.root_value(s0))},
                {"fingerprint", hex(sol.root_fingerprint(s0))},
                {"lattice", lattice_json(sol.lattice())},
                {"max_snap_distance", sig12(sol.max_snap_distance())},
                {"eval", eval_json(evaluate(mdp, pol, s0, y0))},
                {"policy_cells", pdoc["cells"].size()}};
      if (with_policy) j["policy"] = pdoc;
      if (!policy_out.empty()) open_out(policy_out) << pdoc.dump() << '\n';
      emit(j, out);
      return 0;
    }

    if (solve_cmd->parsed()) {
      const TabularMdp mdp = load(model);
      check_state(mdp, s0);
      SolveOptions so;
      so.max_iters = max_iters;
      so.eps_fix = eps_fix;
      so.eps_tie = eps_tie;
      so.break_point_escape = !no_escape;
      so.quantize = quantize;
      so.threads = threads;
      std::vector<SolveReport> runs;
      std::size_t best = 0;
      json j;
      if (!multi.empty()) {
        MultiStartReport ms = solve_multi_start(mdp, s0, parse_list(multi), so);
        best = ms.best;
        runs = std::move(ms.runs);
        json optima = json::array();
        for (double y : ms.distinct_optima) optima.push_back(sig12(y));
        json rj = json::array();
        for (const auto& r : runs) rj.push_back(solve_json(r));
        j = {{"s0", s0}, {"runs", rj}, {"best", best}, {"distinct_optima", optima}, {"disagreement", ms.disagreement}};
      } else {
        so.y0_init = y0_init;
        runs.push_back(solve(mdp, s0, so));
        j = solve_json(runs[0]);
      }
      if (!trace_csv.empty()) {
        auto f = open_out(trace_csv);
        for (std::size_t i = 0; i < runs.size(); ++i) write_trace_csv(f, runs[i], i == 0);
      }
      if (!policy_out.empty() && runs[best].has_policy)
        open_out(policy_out) << policy_to_json(mdp, runs[best].policy, s0).dump() << '\n';
      emit(j, out);
      for (const auto& r : runs)
        if (!r.converged()) return static_cast<int>(ExitCode::solver);
      return 0;
    }

    if (grid->parsed()) {
      const TabularMdp mdp = load(model);
      positive(step, "--step");
      std::vector<int> s0s;
      for (double x : parse_list(s0_list)) {
        s0s.push_back(static_cast<int>(x));
        check_state(mdp, s0s.back());
      }
      Interval dom = pseudo_mean_domain(mdp);
      if (from) dom.lo = *from;
      if (to) dom.hi = *to;
      if (!(dom.hi >= dom.lo)) throw ConfigError("--to must not be below --from");
      SweepOptions so;
      so.eps_tie = eps_tie;
      so.shared_table = !per_point;
      so.threads = threads;
      std::vector<PseudoMeanCurve> curves;
      if (per_point) {
        for (int s : s0s) curves.push_back(sweep(mdp, s, dom, step, so));
      } else {
        curves = sweep_states(mdp, s0s, dom, step, so);
      }
      json arr = json::array();
      for (const auto& c : curves) arr.push_back(curve_summary(c, segment_check(c, mdp.lambda())));
      if (!csv.empty()) {
        auto f = open_out(csv);
        f << "s0,y0,J_hat,fingerprint,segment_id\n";
        for (const auto& c : curves)
          for (const auto& p : c.points)
            f << c.s0 << ',' << fmt12(p.y0) << ',' << fmt12(p.value) << ',' << hex(p.fingerprint) << ',' << p.segment
              << '\n';
      }
      emit(json{{"interval", {sig12(dom.lo), sig12(dom.hi)}}, {"curves", arr}}, out);
      return 0;
    }

    if (eval_cmd->parsed()) {
      const TabularMdp mdp = load(model);
      check_state(mdp, s0);
      const AugmentedPolicy pol = policy_from_json(read_json_file(policy_path));
      const double root = eval_y0.value_or(pol.root());
      const HistoryPolicyView view(pol, root);
      json j = eval_json(evaluate(mdp, view, s0, root));
      if (!simulate_args.empty()) {
        const SimulationResult sim = simulate(mdp, view, s0, simulate_args[0], simulate_args[1], threads);
        j["simulation"] = {{"paths", sim.paths},
                           {"seed", simulate_args[1]},
                           {"mean", sig12(sim.mean)},
                           {"variance", sig12(sim.variance)},
                           {"se_mean", sig12(sim.se_mean)},
                           {"se_variance", sig12(sim.se_variance)},
                           {"ci_mean", sig12(sim.ci_mean)},
                           {"ci_variance", sig12(sim.ci_variance)}};
      }
      emit(j, out);
      return 0;
    }

    if (diag->parsed()) {
      const TabularMdp mdp = load(model);
      check_state(mdp, s0);
      const AugmentedPolicy a = policy_from_json(read_json_file(pa));
      const AugmentedPolicy b = policy_from_json(read_json_file(pb));
      if (a.horizon() != mdp.horizon() || b.horizon() != mdp.horizon())
        throw ConfigError("policy horizon does not match the model");
      const double ra = diag_y0.value_or(a.root()), rb = diag_y0.value_or(b.root());
      const DiagnoseReport d = diagnose(mdp, HistoryPolicyView(a, ra), HistoryPolicyView(b, rb), s0);
      emit(json{{"s0", s0},
                {"y0_a", sig12(ra)},
                {"y0_b", sig12(rb)},
                {"difference_formula", sig12(d.difference_formula)},
                {"direct_difference", sig12(d.direct_difference)},
                {"derivative_formula", sig12(d.derivative_formula)},
                {"finite_difference", sig12(d.finite_difference.richardson)},
                {"finite_difference_steps",
                 {{"1e-4", sig12(d.finite_difference.coarse)}, {"1e-5", sig12(d.finite_difference.fine)}}},
                {"g_recursion_residual", sig12(d.g_residual)},
                {"cells", d.cells}},
           out);
      return 0;
    }

    if (pf->parsed()) {
      PortfolioSpec spec = spec_path.empty() ? example1_spec() : portfolio_spec_from_json(read_json_file(spec_path));
      if (pf_s0) spec.s0 = *pf_s0;
      const PortfolioSolution sol = solve_closed_form(spec);
      json coef = json::array(), dir = json::array(), C = json::array();
      for (int t = 0; t < spec.horizon; ++t) {
        json c = json::array(), d = json::array();
        for (Eigen::Index i = 0; i < sol.direction[t].size(); ++i) {
          c.push_back(sig12(sol.state_coefficient[t][i]));
          d.push_back(sig12(sol.direction[t][i]));
        }
        coef.push_back(c);
        dir.push_back(d);
        C.push_back(sig12(sol.C[t]));
      }
      const MomentResult mr = moment_recursion_evaluate(spec, sol.optimal);
      json j = {{"s0", sig12(spec.s0)},
                {"C", C},
                {"prod_riskless", sig12(sol.prod_riskless)},
                {"prod_C", sig12(sol.prod_C)},
                {"y_star", {{"slope", sig12(sol.y_slope)}, {"intercept", sig12(sol.y_intercept)},
                            {"value", sig12(sol.y_star)}}},
                {"J_star", {{"slope", sig12(sol.J_slope)}, {"intercept", sig12(sol.J_intercept)},
                            {"value", sig12(sol.J_star)}}},
                {"policy", {{"state_coefficient", coef}, {"direction", dir},
                            {"intercept", {{"slope", sig12(sol.intercept_slope)},
                                           {"constant", sig12(sol.intercept_const)}}}}},
                {"moment_recursion", {{"mean", sig12(mr.mean)}, {"variance", sig12(mr.variance)}, {"J", sig12(mr.mv)}}},
                {"flags", sol.flags}};
      if (!curve.empty()) {
        const auto c = parse_list(curve);
        if (c.size() != 3) throw ConfigError("--curve wants from,to,step");
        positive(c[2], "curve step");
        const auto ys = grid_points({c[0], c[1]}, c[2]);
        if (!csv.empty()) {
          auto f = open_out(csv);
          f << "y,J_hat\n";
          for (double y : ys) f << fmt12(y) << ',' << fmt12(closed_form_pseudo_value(spec, spec.s0, y)) << '\n';
        }
        j["curve_points"] = ys.size();
      }
      emit(j, out);
      return 0;
    }

    if (rep_cmd->parsed()) {
      ReproduceOptions ro;
      ro.threads = threads;
      ro.seed = seed;
      ro.mc_paths = paths;
      const ReproduceReport r = reproduce(experiment, ro);
      std::cerr << report_table(r);
      std::cerr << "elapsed " << fmt12(r.seconds) << " s\n";
      emit(report_to_json(r), out);
      return r.ok() ? 0 : static_cast<int>(ExitCode::acceptance);
    }
  } catch (const Error& e) {
    std::cerr << json{{"error", e.what()}, {"exit_code", static_cast<int>(e.code())}}.dump() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}, {"exit_code", static_cast<int>(ExitCode::solver)}}.dump() << '\n';
    return static_cast<int>(ExitCode::solver);
  }
  return 0;
}
