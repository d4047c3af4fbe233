#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mvmdp/parallel.hpp"

namespace mvmdp {

// Multi-period portfolio: s_{t+1} = e0_t s_t + Q_t' a_t with excess returns Q_t.
struct PortfolioSpec {
  int horizon = 0;
  std::vector<double> riskless;            // e0_t
  std::vector<Eigen::VectorXd> mean;       // mu_t = E[Q_t]
  std::vector<Eigen::MatrixXd> second;     // Sigma_t = E[Q_t Q_t']
  double lambda = 1.0;
  double s0 = 1.0;
};

// Example with three risky assets over four periods.  The second moment is either the rounded
// matrix as printed, or rebuilt from the printed covariance as Cov + mu mu'.
PortfolioSpec example1_spec(bool from_covariance = false);
PortfolioSpec portfolio_spec_from_json(const nlohmann::json& j);
nlohmann::json portfolio_spec_to_json(const PortfolioSpec& spec);

// Affine policy a_t = K_t s_t + b_t.
struct LinearPolicy {
  std::vector<Eigen::VectorXd> K;
  std::vector<Eigen::VectorXd> b;
};

struct PortfolioSolution {
  std::vector<double> C;                     // 1 - mu' Sigma^{-1} mu per stage
  double prod_riskless = 1.0;
  double prod_C = 1.0;
  double y_slope = 0.0, y_intercept = 0.0;   // y*(s0)
  double J_slope = 0.0, J_intercept = 0.0;   // J*(s0)
  double y_star = 0.0, J_star = 0.0;         // at spec.s0
  std::vector<Eigen::VectorXd> state_coefficient;  // Sigma^{-1} mu e0_t  (a_t = -this s_t + ...)
  std::vector<Eigen::VectorXd> direction;          // Sigma^{-1} mu
  std::vector<double> discount;                    // prod_{tau>t} 1/e0_tau
  double intercept_slope = 0.0, intercept_const = 0.0;  // scalar multiplying the direction: slope s0 + const
  LinearPolicy optimal;                      // at spec.s0
  std::vector<std::string> flags;
};

PortfolioSolution solve_closed_form(const PortfolioSpec& spec);

// Inner-optimal policy at pseudo mean y.
LinearPolicy inner_policy(const PortfolioSpec& spec, double y);
// Closed-form optimal pseudo mean-variance at (s0, y).
double closed_form_pseudo_value(const PortfolioSpec& spec, double s0, double y);

struct MomentResult {
  double mean = 0.0;
  double second_moment = 0.0;
  double variance = 0.0;
  double mv = 0.0;
};

MomentResult moment_recursion_evaluate(const PortfolioSpec& spec, const LinearPolicy& policy);

struct PortfolioSimulation {
  std::size_t paths = 0;
  double mean = 0.0, variance = 0.0;
  double se_mean = 0.0, se_variance = 0.0;
  double pseudo = 0.0, se_pseudo = 0.0;  // sample mean of s_T - lambda (s_T - y)^2
};

// Multivariate normal returns with mean mu_t and covariance Sigma_t - mu_t mu_t'.
PortfolioSimulation simulate_portfolio(const PortfolioSpec& spec, const LinearPolicy& policy, std::size_t n_paths,
                                       std::uint64_t seed, double y = 0.0, int threads = default_threads());

struct AlternationStep {
  int k = 0;
  double y = 0.0;
  double J = 0.0;
};

struct AlternationReport {
  std::vector<AlternationStep> trace;
  double y_star = 0.0;
  double J = 0.0;
  bool converged = false;
};

// Pseudo-mean alternation with the closed-form inner solve and moment-recursion evaluation.
AlternationReport portfolio_alternation(const PortfolioSpec& spec, double y_init, int max_iters = 100000,
                                        double eps = 1e-10);

}  // namespace mvmdp
