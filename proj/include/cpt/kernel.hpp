#pragma once

// Lognormal state-price density: market parameters, distribution, quantiles
// and truncated power moments.

#include <Eigen/Dense>

#include "cpt/numerics.hpp"

namespace cpt {

/// Constant-coefficient complete market.
struct MarketParams {
  double rate = 0.0;                ///< risk-free rate r (1/year)
  Eigen::VectorXd excess_return;    ///< B = b - r 1 (1/year)
  Eigen::MatrixXd volatility;       ///< sigma, square (1/sqrt(year))
  double horizon = 1.0;             ///< T (years)

  /// Single-asset convenience constructor.
  static MarketParams single_asset(double rate, double excess_return, double volatility,
                                   double horizon);

  /// theta = sigma^{-1} B. Throws ModelError if sigma is singular or not square.
  Eigen::VectorXd market_price_of_risk() const;
  /// (sigma sigma')^{-1} B, the direction every replicating portfolio points in.
  Eigen::VectorXd merton_direction() const;
  /// Throws ModelError on any violated invariant.
  void validate() const;
};

/// A level in rho-space that may be +infinity (the essential supremum of a
/// lognormal kernel). Finite levels are nonnegative.
class Threshold {
 public:
  Threshold(double value);  // NOLINT(google-explicit-constructor)
  static Threshold infinity() { return Threshold(); }

  bool is_infinite() const { return infinite_; }
  /// Throws DomainError when infinite.
  double value() const;
  /// ln of the level with ln 0 = -inf and ln inf = +inf.
  double log() const;
  /// The level as a double (+inf for the sentinel).
  double as_double() const { return infinite_ ? kInf : value_; }

  friend bool operator==(const Threshold&, const Threshold&) = default;

 private:
  Threshold() : value_(0.0), infinite_(true) {}
  double value_;
  bool infinite_;
};

/// ln rho ~ N(mu, sd^2).
class PricingKernel {
 public:
  /// Throws ModelError unless sd > 0 and both are finite.
  PricingKernel(double mu, double sd);

  /// Kernel of rho(T) seen from time 0.
  static PricingKernel from_market(const MarketParams& m);
  /// Kernel of rho(t, T) = rho(T)/rho(t) given information at time t < T.
  static PricingKernel conditional(const MarketParams& m, double t);

  double mu() const { return mu_; }
  double sd() const { return sd_; }

  /// (ln x - mu)/sd; -inf at x = 0, +inf at x = inf.
  double score(double x) const;
  /// e^{mu + sd s}.
  double level(double s) const;

  double pdf(double x) const;
  double cdf(double x) const;
  /// 1 - cdf(x), accurate in the upper tail.
  double sf(double x) const;
  double sf(const Threshold& x) const;
  double quantile(double p) const;

  /// E[rho^beta 1{a < rho <= b}].
  double partial_power_moment(double beta, double a, const Threshold& b) const;
  /// E[rho].
  double mean() const { return partial_power_moment(1.0, 0.0, Threshold::infinity()); }

  friend bool operator==(const PricingKernel&, const PricingKernel&) = default;

 private:
  double mu_;
  double sd_;
};

}  // namespace cpt
