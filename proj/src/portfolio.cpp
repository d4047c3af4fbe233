#include "mvmdp/portfolio.hpp"

#include <cmath>
#include <sstream>

#include "mvmdp/error.hpp"
#include "mvmdp/rng.hpp"

namespace mvmdp {

namespace {

void check_spec(const PortfolioSpec& spec) {
  const auto T = static_cast<std::size_t>(spec.horizon);
  if (spec.horizon < 1) throw ConfigError("portfolio horizon must be positive");
  if (spec.riskless.size() != T || spec.mean.size() != T || spec.second.size() != T)
    throw ConfigError("portfolio spec needs one rate, mean and second moment per stage");
  if (!(spec.lambda > 0)) throw ConfigError("portfolio risk aversion must be positive");
  for (std::size_t t = 0; t < T; ++t) {
    if (!(spec.riskless[t] > 0)) throw ConfigError("riskless rates must be positive");
    const auto n = spec.mean[t].size();
    if (spec.second[t].rows() != n || spec.second[t].cols() != n) throw ConfigError("second moment shape mismatch");
  }
}

// Sigma_t^{-1} mu_t by Cholesky.
Eigen::VectorXd solve_direction(const PortfolioSpec& spec, int t) {
  const Eigen::MatrixXd& S = spec.second[t];
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, S.cwiseAbs().maxCoeff()))
    throw SolverError("second moment matrix at stage " + std::to_string(t) + " is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success)
    throw SolverError("second moment matrix at stage " + std::to_string(t) + " is singular or not positive definite");
  return llt.solve(spec.mean[t]);
}

double discount_after(const PortfolioSpec& spec, int t) {
  double d = 1.0;
  for (int tau = t + 1; tau < spec.horizon; ++tau) d /= spec.riskless[tau];
  return d;
}

struct Products {
  double e = 1.0, c = 1.0, ec = 1.0, eec = 1.0;
  std::vector<double> C;
};

Products products(const PortfolioSpec& spec) {
  Products p;
  for (int t = 0; t < spec.horizon; ++t) {
    const double c = 1.0 - spec.mean[t].dot(solve_direction(spec, t));
    const double e = spec.riskless[t];
    p.C.push_back(c);
    p.e *= e;
    p.c *= c;
    p.ec *= e * c;
    p.eec *= e * e * c;
  }
  return p;
}

}  // namespace

PortfolioSpec example1_spec(bool from_covariance) {
  PortfolioSpec spec;
  spec.horizon = 4;
  spec.lambda = 2.0;
  spec.s0 = 1.0;
  Eigen::Vector3d mu(0.122, 0.206, 0.188);
  Eigen::Matrix3d sigma;
  if (from_covariance) {
    Eigen::Matrix3d cov;
    cov << 0.0146, 0.0187, 0.0145,
           0.0187, 0.0854, 0.0104,
           0.0145, 0.0104, 0.0289;
    sigma = cov + mu * mu.transpose();
  } else {
    sigma << 0.0295, 0.0438, 0.0374,
             0.0438, 0.1278, 0.0491,
             0.0374, 0.0491, 0.0642;
  }
  for (int t = 0; t < spec.horizon; ++t) {
    spec.riskless.push_back(1.04);
    spec.mean.emplace_back(mu);
    spec.second.emplace_back(sigma);
  }
  return spec;
}

PortfolioSpec portfolio_spec_from_json(const nlohmann::json& j) {
  try {
    PortfolioSpec spec;
    spec.horizon = j.at("horizon").get<int>();
    spec.lambda = j.at("lambda").get<double>();
    spec.s0 = j.value("s0", 1.0);
    const auto T = static_cast<std::size_t>(std::max(spec.horizon, 0));
    auto per_stage = [&](const nlohmann::json& x, auto&& read, auto& out, bool nested) {
      if (nested) {
        if (x.size() != T) throw ConfigError("per-stage list length differs from horizon");
        for (const auto& e : x) out.push_back(read(e));
      } else {
        for (std::size_t t = 0; t < T; ++t) out.push_back(read(x));
      }
    };
    const auto& r = j.at("riskless");
    per_stage(r, [](const nlohmann::json& e) { return e.get<double>(); }, spec.riskless, r.is_array());
    auto vec = [](const nlohmann::json& e) {
      auto v = e.get<std::vector<double>>();
      return Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    auto mat = [](const nlohmann::json& e) {
      auto rows = e.get<std::vector<std::vector<double>>>();
      Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows[0].size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != static_cast<std::size_t>(m.cols())) throw ConfigError("ragged matrix");
        for (std::size_t k = 0; k < rows[i].size(); ++k) m(i, k) = rows[i][k];
      }
      return m;
    };
    const auto& m = j.at("mean");
    per_stage(m, vec, spec.mean, m.is_array() && !m.empty() && m[0].is_array());
    if (j.contains("second")) {
      const auto& s = j.at("second");
      per_stage(s, mat, spec.second, s.is_array() && !s.empty() && s[0].is_array() && !s[0].empty() && s[0][0].is_array());
    } else {
      std::vector<Eigen::MatrixXd> cov;
      const auto& c = j.at("covariance");
      per_stage(c, mat, cov, c.is_array() && !c.empty() && c[0].is_array() && !c[0].empty() && c[0][0].is_array());
      for (std::size_t t = 0; t < T; ++t) spec.second.push_back(cov[t] + spec.mean[t] * spec.mean[t].transpose());
    }
    check_spec(spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed portfolio spec: ") + e.what());
  }
}

nlohmann::json portfolio_spec_to_json(const PortfolioSpec& spec) {
  nlohmann::json j;
  j["horizon"] = spec.horizon;
  j["lambda"] = spec.lambda;
  j["s0"] = spec.s0;
  j["riskless"] = spec.riskless;
  nlohmann::json means = nlohmann::json::array(), seconds = nlohmann::json::array();
  for (int t = 0; t < spec.horizon; ++t) {
    means.push_back(std::vector<double>(spec.mean[t].data(), spec.mean[t].data() + spec.mean[t].size()));
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < spec.second[t].rows(); ++i) {
      std::vector<double> row;
      for (Eigen::Index k = 0; k < spec.second[t].cols(); ++k) row.push_back(spec.second[t](i, k));
      rows.push_back(row);
    }
    seconds.push_back(rows);
  }
  j["mean"] = means;
  j["second"] = seconds;
  return j;
}

PortfolioSolution solve_closed_form(const PortfolioSpec& spec) {
  check_spec(spec);
  PortfolioSolution sol;
  const Products p = products(spec);
  sol.C = p.C;
  for (int t = 0; t < spec.horizon; ++t)
    if (!(p.C[t] > 0 && p.C[t] < 1)) {
      std::ostringstream os;
      os << "C_" << t << " = " << p.C[t] << " outside (0,1)";
      sol.flags.push_back(os.str());
    }
  if (!(p.c > 0)) throw SolverError("embedding degenerate: product of C_t is not positive");
  const double lam = spec.lambda;
  sol.prod_riskless = p.e;
  sol.prod_C = p.c;
  sol.y_slope = p.e;
  sol.y_intercept = (1.0 - p.c) / (2.0 * lam * p.c);
  sol.J_slope = p.e;
  sol.J_intercept = (1.0 - p.c) / (4.0 * lam * p.c);
  sol.y_star = sol.y_slope * spec.s0 + sol.y_intercept;
  sol.J_star = sol.J_slope * spec.s0 + sol.J_intercept;
  sol.intercept_slope = p.e;
  sol.intercept_const = 1.0 / (2.0 * lam * p.c);
  const double scalar = sol.intercept_slope * spec.s0 + sol.intercept_const;
  for (int t = 0; t < spec.horizon; ++t) {
    const Eigen::VectorXd d = solve_direction(spec, t);
    sol.direction.push_back(d);
    sol.state_coefficient.push_back(d * spec.riskless[t]);
    sol.discount.push_back(discount_after(spec, t));
    sol.optimal.K.push_back(-d * spec.riskless[t]);
    sol.optimal.b.push_back(d * (scalar * sol.discount.back()));
  }
  return sol;
}

LinearPolicy inner_policy(const PortfolioSpec& spec, double y) {
  check_spec(spec);
  LinearPolicy pol;
  for (int t = 0; t < spec.horizon; ++t) {
    const Eigen::VectorXd d = solve_direction(spec, t);
    pol.K.push_back(-d * spec.riskless[t]);
    pol.b.push_back(d * ((y + 1.0 / (2.0 * spec.lambda)) * discount_after(spec, t)));
  }
  return pol;
}

double closed_form_pseudo_value(const PortfolioSpec& spec, double s0, double y) {
  check_spec(spec);
  const Products p = products(spec);
  const double lam = spec.lambda;
  return -lam * p.c * y * y + (1.0 - p.c + 2.0 * lam * p.ec * s0) * y + (1.0 - p.c) / (4.0 * lam) + p.ec * s0 -
         lam * p.eec * s0 * s0;
}

MomentResult moment_recursion_evaluate(const PortfolioSpec& spec, const LinearPolicy& pol) {
  check_spec(spec);
  double m1 = spec.s0, m2 = spec.s0 * spec.s0;
  for (int t = 0; t < spec.horizon; ++t) {
    const Eigen::VectorXd& K = pol.K[t];
    const Eigen::VectorXd& b = pol.b[t];
    const Eigen::VectorXd& mu = spec.mean[t];
    const Eigen::MatrixXd& S = spec.second[t];
    const double e = spec.riskless[t];
    const double muK = mu.dot(K), mub = mu.dot(b);
    const double KSK = K.dot(S * K), KSb = K.dot(S * b), bSb = b.dot(S * b);
    const double n1 = (e + muK) * m1 + mub;
    const double n2 = e * e * m2 + 2.0 * e * (muK * m2 + mub * m1) + KSK * m2 + 2.0 * KSb * m1 + bSb;
    m1 = n1;
    m2 = n2;
  }
  MomentResult r;
  r.mean = m1;
  r.second_moment = m2;
  r.variance = std::max(0.0, m2 - m1 * m1);
  r.mv = m1 - spec.lambda * r.variance;
  return r;
}

PortfolioSimulation simulate_portfolio(const PortfolioSpec& spec, const LinearPolicy& pol, std::size_t n_paths,
                                       std::uint64_t seed, double y, int threads) {
  check_spec(spec);
  if (n_paths < 2) throw ConfigError("simulation needs at least two paths");
  std::vector<Eigen::MatrixXd> root;
  for (int t = 0; t < spec.horizon; ++t) {
    const Eigen::MatrixXd cov = spec.second[t] - spec.mean[t] * spec.mean[t].transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const double tol = 1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -tol)
      throw SolverError("covariance Sigma - mu mu' is not positive semidefinite at stage " + std::to_string(t));
    root.push_back(es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal());
  }
  std::vector<double> terminal(n_paths);
  parallel_for(n_paths, threads, [&](std::size_t i) {
    CounterRng rng(seed, i);
    double s = spec.s0;
    for (int t = 0; t < spec.horizon; ++t) {
      Eigen::VectorXd z(spec.mean[t].size());
      for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = rng.normal();
      const Eigen::VectorXd q = spec.mean[t] + root[t] * z;
      const Eigen::VectorXd a = pol.K[t] * s + pol.b[t];
      s = spec.riskless[t] * s + q.dot(a);
    }
    terminal[i] = s;
  });
  PortfolioSimulation r;
  r.paths = n_paths;
  const double n = static_cast<double>(n_paths);
  double mean = 0.0, pseudo = 0.0;
  for (double s : terminal) {
    mean += s;
    pseudo += s - spec.lambda * (s - y) * (s - y);
  }
  mean /= n;
  pseudo /= n;
  double m2 = 0.0, m4 = 0.0, pv = 0.0;
  for (double s : terminal) {
    const double d = s - mean;
    m2 += d * d;
    m4 += d * d * d * d;
    const double pd = s - spec.lambda * (s - y) * (s - y) - pseudo;
    pv += pd * pd;
  }
  r.mean = mean;
  r.variance = m2 / (n - 1);
  r.se_mean = std::sqrt(r.variance / n);
  r.se_variance = std::sqrt(std::max(0.0, m4 / n - (n - 3) / (n - 1) * r.variance * r.variance) / n);
  r.pseudo = pseudo;
  r.se_pseudo = std::sqrt(pv / (n - 1) / n);
  return r;
}

AlternationReport portfolio_alternation(const PortfolioSpec& spec, double y_init, int max_iters, double eps) {
  AlternationReport rep;
  double y = y_init;
  for (int k = 0; k < max_iters; ++k) {
    const MomentResult m = moment_recursion_evaluate(spec, inner_policy(spec, y));
    rep.trace.push_back({k, y, m.mv});
    rep.y_star = m.mean;
    rep.J = m.mv;
    if (std::abs(m.mean - y) <= eps) {
      rep.converged = true;
      break;
    }
    y = m.mean;
  }
  return rep;
}

}  // namespace mvmdp
