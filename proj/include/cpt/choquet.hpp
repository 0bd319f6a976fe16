#pragma once

// Distorted expectations (Choquet integrals) of nonnegative claims, in
// discrete and quantile form, and the rearrangement operators.

#include <functional>
#include <span>
#include <vector>

#include "cpt/kernel.hpp"
#include "cpt/preferences.hpp"

namespace cpt {

using UtilityFn = std::function<double(double)>;

struct Outcome {
  double value = 0.0;
  double prob = 0.0;
};

/// A simple nonnegative random variable. Duplicate values are allowed.
struct DiscreteClaim {
  std::vector<Outcome> outcomes;

  /// Throws DomainError unless probabilities are positive and sum to 1
  /// (1e-12) and values are finite and nonnegative.
  void validate() const;
};

/// Nondecreasing, left-continuous quantile function g on (0, 1).
class QuantileFn {
 public:
  enum class Kind { Step, Linear, ClosedForm };

  /// g(z) = values[i] for z in (knots[i], knots[i+1]] with knots[0] = 0 and an
  /// implicit last knot at 1.
  static QuantileFn step(std::vector<double> knots, std::vector<double> values);
  /// Piecewise-linear through (knots[i], values[i]); knots[0] = 0 and the last
  /// knot is 1.
  static QuantileFn linear(std::vector<double> knots, std::vector<double> values);
  /// Arbitrary nondecreasing handle; `kinks` lists points of non-smoothness.
  static QuantileFn closed_form(std::function<double(double)> g, std::vector<double> kinks = {});
  /// Step quantile function of a discrete claim.
  static QuantileFn of_claim(const DiscreteClaim& x);

  Kind kind() const { return kind_; }
  double operator()(double z) const;
  /// Interior points of (0, 1) where g is not smooth.
  const std::vector<double>& breakpoints() const { return kinks_; }

 private:
  QuantileFn() = default;
  Kind kind_ = Kind::Step;
  std::vector<double> knots_;
  std::vector<double> values_;
  std::function<double(double)> fn_;
  std::vector<double> kinks_;
};

/// Sum over sorted distinct utility levels of (u_i - u_{i-1}) T(P(X >= x_i)).
double choquet_value_discrete(const DiscreteClaim& x, const UtilityFn& u, const Distortion& t);

struct ChoquetQuadrature {
  double abs_tol = 1e-9;
  double rel_tol = 1e-10;
  /// Exponent of the endpoint substitution z = s^p.
  double endpoint_power = 2.0;
};

/// Integral over (0, 1) of u(g(z)) T'(1 - z) dz.
double choquet_value_quantile(const QuantileFn& g, const UtilityFn& u, const Distortion& t,
                              const ChoquetQuadrature& cfg = {});

/// A claim written as a function of the kernel value, with its price.
struct ArrangedClaim {
  std::function<double(double)> payoff;  ///< rho -> X(rho)
  double price = 0.0;                    ///< E[X rho]
  bool finite = true;                    ///< false when E[X rho] diverges
};

/// X = g(F(rho)): the arrangement with law g that maximises E[X rho].
ArrangedClaim comonotone_max(const QuantileFn& g, const PricingKernel& k);
/// X = g(1 - F(rho)): the arrangement with law g that minimises E[X rho].
ArrangedClaim anticomonotone_min(const QuantileFn& g, const PricingKernel& k);

/// Equal-probability finite-state analogues: reorders `values` so that they
/// move with (comonotone) or against (anti-comonotone) `rho`.
std::vector<double> comonotone_arrangement(std::span<const double> values,
                                           std::span<const double> rho);
std::vector<double> anticomonotone_arrangement(std::span<const double> values,
                                               std::span<const double> rho);

/// Nondecreasing nonnegative step function on [0, inf): level[i] on
/// (jumps[i-1], jumps[i]) with jumps[-1] = 0 and the last level extending to
/// infinity. jumps.size() + 1 == levels.size().
struct StepFunction {
  std::vector<double> jumps;
  std::vector<double> levels;

  void validate() const;
  /// f(y-) and f(y+).
  double left_limit(double y) const;
  double right_limit(double y) const;
  /// Integral of f over [0, y].
  double integral(double y) const;
  /// Integral over [0, x] of the left-continuous inverse inf{y : f(y) >= v}.
  /// +inf when x exceeds the top level.
  double inverse_integral(double x) const;
};

/// Young gap: integral_0^x f^{-1} + integral_0^y f - x y (always >= 0).
double rearrangement_gap(const StepFunction& f, double x, double y);
/// f(y-) <= x <= f(y+), the condition under which the gap vanishes.
bool rearrangement_equality_condition(const StepFunction& f, double x, double y);

}  // namespace cpt
