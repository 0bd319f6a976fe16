#pragma once

// Wealth and portfolio processes that replicate binary power claims and the
// optimal claim of the gains-only regime, plus risky-ratio diagnostics.

#include <Eigen/Dense>

#include "cpt/kernel.hpp"
#include "cpt/solver.hpp"

namespace cpt {

struct PathPoint {
  double t = 0.0;      ///< years, 0 <= t < T
  double rho_t = 1.0;  ///< current kernel value rho(t)
};

struct WealthPortfolio {
  double x = 0.0;       ///< wealth x(t)
  Eigen::VectorXd pi;   ///< currency amounts in each risky asset
};

/// Replicates X = rho(T)^a 1{c1 < rho(T) <= c2}. c2 may be +inf.
/// Switches to the indicator limit when the remaining kernel volatility is
/// below 1e-4.
WealthPortfolio replicate_binary_power(const MarketParams& market, double a, double c1,
                                       const Threshold& c2, const PathPoint& p);

/// Parameters of the gains-only optimal strategy with a reversed-S T+.
struct OptimalPathParams {
  MarketParams market;
  double alpha = 0.88;
  double c0 = 1.0;
  double a = -0.5;
  double b = 0.5;
  double x0 = 1.0;
};

/// The pieces of the optimal strategy at one (t, rho_t).
struct OptimalPathPoint {
  double x1 = 0.0;     ///< binary claim on {rho <= c0}
  double x2 = 0.0;     ///< binary claim on {rho > c0}
  double gamma = 0.0;  ///< price normaliser
  double weight = 1.0; ///< c0^{(a-b)/(1-alpha)}
  WealthPortfolio wp;
};

/// Closed-form x*(t), pi*(t). a = b is allowed.
OptimalPathPoint optimal_path(const OptimalPathParams& params, const PathPoint& p);

/// Same, after checking that the model is in the gains-only regime
/// (CRRA, x0 >= 0, inf k >= 1, T+ reversed-S built on the model kernel).
OptimalPathPoint optimal_path(const BehavioralModel& m, const PathPoint& p);

/// Extracts the closed-form parameters from a model, with the same checks.
OptimalPathParams optimal_path_params(const BehavioralModel& m);

/// pi*(t) / x*(t).
Eigen::VectorXd risky_ratio(const OptimalPathParams& params, const PathPoint& p);

/// (1 - alpha)^{-1} (sigma sigma')^{-1} B. Throws DomainError for alpha >= 1.
Eigen::VectorXd merton_ratio(const MarketParams& market, double alpha);

}  // namespace cpt
