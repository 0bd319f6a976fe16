#pragma once

// Shared numerical primitives: normal distribution, quadrature, 1-D search,
// and the error types used across the library.

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the documented domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent model parameters (singular volatility, degenerate kernel, ...).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure did not reach its target accuracy.
class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& what, double estimate)
      : Error(what), estimate_(estimate) {}
  double estimate() const { return estimate_; }

 private:
  double estimate_;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Standard normal distribution

double normal_pdf(double x);
double normal_log_pdf(double x);
double normal_cdf(double x);
/// Upper tail 1 - Phi(x), accurate for large x.
double normal_sf(double x);
/// Phi(hi) - Phi(lo) without cancellation in either tail.
double normal_interval(double lo, double hi);
/// Inverse of normal_cdf on (0, 1). Throws DomainError outside.
double normal_quantile(double p);

// ---------------------------------------------------------------------------
// Quadrature

struct QuadratureOptions {
  double rel_tol = 1e-11;
  double abs_tol = 0.0;
  unsigned max_depth = 18;
};

struct Integral {
  double value = 0.0;
  double error = 0.0;
};

/// Adaptive Gauss-Kronrod on [a, b]; either limit may be infinite.
Integral integrate(const std::function<double(double)>& f, double a, double b,
                   const QuadratureOptions& opts = {});

/// Same, split at every interior breakpoint (must be sorted).
Integral integrate_piecewise(const std::function<double(double)>& f, double a, double b,
                             std::span<const double> breakpoints,
                             const QuadratureOptions& opts = {});

/// Result of integrating a nonnegative integrand against a standard-normal
/// score variable over [lo, hi].
struct ScoreIntegral {
  double value = 0.0;
  double error = 0.0;
  /// false when the integrand has not decayed at an infinite end of the range,
  /// i.e. the integral is (numerically) divergent.
  bool converged = true;
};

/// Integrates exp(log_f(s)) over s in [lo, hi] (lo may be -inf, hi may be +inf).
/// The integrand is assumed smooth except at `kinks`. Infinite ends are
/// truncated where the integrand has decayed by e^-40 relative to its peak;
/// if it has not decayed within |s| <= 80 the result is flagged divergent.
ScoreIntegral integrate_score(const std::function<double(double)>& log_f, double lo,
                              double hi, std::span<const double> kinks = {},
                              const QuadratureOptions& opts = {});

// ---------------------------------------------------------------------------
// One-dimensional search

struct Minimum {
  double x = 0.0;
  double value = 0.0;
};

/// Golden-section minimisation on [lo, hi] to absolute tolerance `tol` in x.
Minimum golden_section_min(const std::function<double(double)>& f, double lo, double hi,
                           double tol = 1e-10, int max_iter = 200);

/// Points evenly spaced from lo to hi inclusive.
std::vector<double> linspace(double lo, double hi, std::size_t n);

// ---------------------------------------------------------------------------
// Parallelism

/// Worker count: hardware concurrency, capped by CPT_NUM_THREADS when set.
std::size_t worker_count();

/// Runs body(i) for i in [0, n) on up to worker_count() threads. Each index
/// is visited exactly once; callers write results into per-index slots so the
/// outcome is independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace cpt
