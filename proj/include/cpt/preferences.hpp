#pragma once

// S-shaped utilities, probability distortions, and audits of the standing
// assumptions on them.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cpt/kernel.hpp"

namespace cpt {

// ---------------------------------------------------------------------------
// Validation reports

enum class CheckStatus { Pass, Fail, Waived };

struct CheckResult {
  std::string name;
  CheckStatus status = CheckStatus::Pass;
  std::string witness;  ///< human-readable evidence for the verdict
};

struct ValidationReport {
  std::vector<CheckResult> checks;

  bool passed() const;
  const CheckResult* find(const std::string& name) const;
  bool passed(const std::string& name) const;
  void add(std::string name, bool ok, std::string witness = {});
  /// Marks the named check as waived (kept in the report).
  void waive(const std::string& name);
};

std::string to_string(CheckStatus s);

// ---------------------------------------------------------------------------
// Utilities

/// u+(x) = x^alpha, u-(x) = k_minus x^alpha.
struct TwoPieceCrra {
  double alpha = 0.88;
  double k_minus = 2.25;
};

/// Arbitrary gain/loss utility given by function handles on [0, inf).
struct GenericUtility {
  std::function<double(double)> gain;
  std::function<double(double)> loss;
  std::function<double(double)> gain_prime;
  std::function<double(double)> gain_prime_inverse;
  std::function<double(double)> gain_second;
  bool gain_unbounded = true;  ///< u+(inf) = inf
};

class SShapedUtility {
 public:
  static SShapedUtility two_piece_crra(double alpha, double k_minus);
  static SShapedUtility generic(GenericUtility u);
  /// The two-piece CRRA utility expressed through GenericUtility handles, so
  /// that code paths without a CRRA specialisation can be exercised on it.
  static SShapedUtility crra_as_generic(double alpha, double k_minus);

  bool is_crra() const { return std::holds_alternative<TwoPieceCrra>(repr_); }
  /// Null unless is_crra().
  const TwoPieceCrra* crra() const { return std::get_if<TwoPieceCrra>(&repr_); }

  double gain(double x) const;
  double loss(double x) const;
  double gain_prime(double x) const;
  /// (u+')^{-1}(y) for y > 0.
  double gain_prime_inverse(double y) const;
  double gain_second(double x) const;
  /// R_u(x) = -x u+''(x) / u+'(x).
  double relative_risk_aversion(double x) const;
  bool gain_unbounded() const;
  /// False for a loss utility that is linear near zero.
  bool loss_strictly_concave_at_zero() const;

 private:
  explicit SShapedUtility(std::variant<TwoPieceCrra, GenericUtility> r) : repr_(std::move(r)) {}
  std::variant<TwoPieceCrra, GenericUtility> repr_;
};

// ---------------------------------------------------------------------------
// Distortions

struct IdentityDistortion {};

/// T(p) = p^gamma.
struct PowerDistortion {
  double gamma = 1.0;
};

/// Tversky-Kahneman weighting p^d / (p^d + (1-p)^d)^{1/d}.
struct TverskyKahnemanDistortion {
  double delta = 0.69;
};

/// p^gamma on [0, knee], then the chord to (1, 1).
struct TruncatedPowerDistortion {
  double gamma = 0.25;
  double knee = 0.5;
};

/// Monotone piecewise-cubic interpolation through (p_i, T_i).
struct TabulatedDistortion {
  std::vector<double> p;
  std::vector<double> t;
  std::vector<double> slope;  ///< Hermite slopes, filled at construction
};

/// Kernel-dependent reversed-S family whose j-function is a on (0, c0] and b
/// on (c0, inf): T'(F(x)) = kappa x^a for x <= c0 and kappa c0^(a-b) x^b above.
struct ReversedSDistortion {
  double mu = 0.0;  ///< kernel the family was built on
  double sd = 1.0;
  double c0 = 1.0;
  double a = -0.5;
  double b = 0.5;
  double kappa = 1.0;  ///< normalisation, T(1) = 1

  double kappa_tilde() const;
  /// H(x) = T(F(x)).
  double value_at_state(double x) const;
  /// T'(F(x)).
  double weight_at_state(double x) const;
};

class Distortion {
 public:
  enum class Kind { Identity, Power, TverskyKahneman, TruncatedPower, Tabulated, ReversedS };

  static Distortion identity();
  static Distortion power(double gamma);
  static Distortion tversky_kahneman(double delta);
  static Distortion truncated_power(double gamma, double knee);
  /// Table must have p_0 = 0, p_n = 1 and strictly increasing p. Monotonicity
  /// of the values is *not* enforced; validate_distortion reports it.
  static Distortion tabulated(std::vector<double> p, std::vector<double> t);
  static Distortion reversed_s(const ReversedSDistortion& params);

  Kind kind() const;
  std::string name() const;
  const ReversedSDistortion* reversed_s_params() const {
    return std::get_if<ReversedSDistortion>(&repr_);
  }
  /// gamma for a pure power distortion, empty otherwise.
  std::optional<double> power_exponent() const {
    if (const auto* p = std::get_if<PowerDistortion>(&repr_)) return p->gamma;
    return std::nullopt;
  }

  double operator()(double p) const;
  double derivative(double p) const;
  /// T'(1 - q), accurate for q far below the spacing of doubles near 1.
  double derivative_upper(double q) const;
  /// T'(F(x)) for the kernel's distribution function F. Uses the closed form
  /// when the distortion was built on the same kernel.
  double state_weight(const PricingKernel& k, double x) const;
  /// ln T'(F(x)) at x = e^{mu + sd s}; stays finite deep in the tails where
  /// state_weight would overflow.
  double log_state_weight(const PricingKernel& k, double s) const;
  /// Probabilities in (0, 1) where T' is not smooth.
  std::vector<double> probability_kinks() const;
  /// rho-levels where T'(F(.)) is not smooth.
  std::vector<double> state_kinks(const PricingKernel& k) const;

 private:
  using Repr = std::variant<IdentityDistortion, PowerDistortion, TverskyKahnemanDistortion,
                            TruncatedPowerDistortion, TabulatedDistortion, ReversedSDistortion>;
  explicit Distortion(Repr r) : repr_(std::move(r)) {}
  bool built_on(const PricingKernel& k) const;
  Repr repr_;
};

/// Reversed-S distortion with j = a on (0, c0] and j = b above c0, normalised
/// so that T(1) = 1. Requires a < 0 < b < 1 and c0 > 0.
Distortion build_reversed_s(const PricingKernel& k, double c0, double a, double b);

// ---------------------------------------------------------------------------
// Assumption audits

/// Monotonicity, concavity, u(0) = 0, Inada behaviour at the grid ends and
/// liminf R_u > 0 on the largest grid points. Grid must be increasing with at
/// least 16 positive points.
ValidationReport validate_utility(const SShapedUtility& u, std::span<const double> grid);

/// T(0) = 0, T(1) = 1, strict monotonicity and a finite positive derivative
/// on the grid (a subset of (0, 1)).
ValidationReport validate_distortion(const Distortion& t, std::span<const double> grid);

struct MonotonicityResult {
  bool holds = true;
  /// First violating pair (z_i, z_{i+1}) when !holds.
  std::optional<std::pair<double, double>> violation;
};

/// Checks that z -> F^{-1}(z) / T'(z) is non-decreasing on a z-grid clustered
/// near 0 and 1 (uniform in normal score), to 1e-10 relative.
MonotonicityResult monotonicity_check(const PricingKernel& k, const Distortion& t_plus,
                                      std::size_t n = 400);

/// j(x) = x H''(x)/H'(x) - x F''(x)/F'(x) with H = T o F, equivalently
/// x d/dx ln T'(F(x)). Closed form for identity, power and reversed-S built on
/// k; central differences (step x 1e-4) otherwise.
double j_function(const PricingKernel& k, const Distortion& t_plus, double x);
/// Always the central-difference estimate.
double j_function_numeric(const PricingKernel& k, const Distortion& t_plus, double x);

}  // namespace cpt
