#pragma once

// The solution pipeline: positive-part maximisation, negative-part corner
// minimisation, well-posedness classification and the master (c, x+) program.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cpt/kernel.hpp"
#include "cpt/preferences.hpp"

namespace cpt {

/// One problem instance. The kernel is derived from the market.
struct BehavioralModel {
  BehavioralModel(MarketParams market, SShapedUtility utility, Distortion t_plus,
                  Distortion t_minus, double x0);

  MarketParams market;
  PricingKernel kernel;
  SShapedUtility utility;
  Distortion t_plus;
  Distortion t_minus;
  double x0;
  /// Names of audit checks the caller has explicitly waived.
  std::vector<std::string> waived;

  bool is_waived(const std::string& check) const;
};

struct SolverOptions {
  std::size_t c_grid = 512;          ///< points of the threshold grid
  double quantile_lo = 1e-6;         ///< grid spans these quantiles of rho
  double quantile_hi = 1.0 - 1e-6;
  double probe_lo = 1e-8;            ///< endpoint asymptote probes
  double probe_hi = 1.0 - 1e-8;
  double borderline_band = 1e-6;     ///< |inf k - 1| below this is Borderline
  double budget_rel_tol = 1e-10;     ///< lambda bisection target
  int max_bisection = 200;
  double x_plus_max_factor = 1e6;    ///< general path: x+ <= factor (1 + |x0|)
  std::size_t general_c_grid = 48;   ///< general path outer grid
  std::size_t general_x_grid = 40;   ///< general path inner grid
  QuadratureOptions quad{1e-11, 0.0, 18};
};

/// Optimal terminal wealth: gain_profile(rho) on {rho <= c*}, -loss_level above.
struct TerminalClaim {
  Threshold c_star = Threshold::infinity();
  double x_plus_star = 0.0;
  std::optional<double> lambda_star;
  std::function<double(double)> gain_profile;
  double loss_level = 0.0;

  /// X*(rho).
  double payoff(double rho) const;
  /// E[rho X*] recomputed by quadrature.
  double budget(const PricingKernel& k) const;
};

enum class Tag { WellPosedAttained, WellPosedUnattained, IllPosed, Borderline, Unknown };
std::string to_string(Tag t);

struct CurvePoint {
  double c = 0.0;
  double k = 0.0;
  double g = 0.0;
};

struct Classification {
  Tag tag = Tag::Unknown;
  /// Optimal or supremum value; +inf when ill-posed.
  double value = 0.0;
  std::optional<TerminalClaim> claim;
  std::string diagnostic;
  /// inf over c > 0 of k(c) and where it sits (CRRA only).
  std::optional<double> inf_k;
  double c_at_inf_k = 0.0;
  /// (c, k(c), G(c)) over the threshold grid (CRRA only).
  std::vector<CurvePoint> curve;
  ValidationReport audit;
};

struct PositivePart {
  double lambda = 0.0;  ///< 0 when the gain part is trivial
  double v_plus = 0.0;  ///< -inf when infeasible
  std::function<double(double)> gain_profile;
  bool feasible = true;
};

struct NegativePart {
  Threshold c_bar = Threshold::infinity();
  double loss_level = 0.0;
  double v_minus = 0.0;
  bool attained = true;
};

/// phi(c) = E[(T+'(F(rho))/rho)^{1/(1-alpha)} rho 1{rho <= c}]; +inf when the
/// integral diverges. CRRA utilities only.
double phi(const BehavioralModel& m, const Threshold& c, const SolverOptions& opts = {});

/// Gain-side problem on {rho <= c} with budget x_plus.
PositivePart solve_positive_part(const BehavioralModel& m, const Threshold& c, double x_plus,
                                 const SolverOptions& opts = {});

/// Loss-side problem on {rho > c} with loss budget x_plus - x0.
NegativePart solve_negative_part(const BehavioralModel& m, const Threshold& c, double x_plus,
                                 const SolverOptions& opts = {});

/// k(c) = k- T-(1 - F(c)) / (phi(c)^{1-alpha} E[rho 1{rho > c}]^alpha); +inf
/// when phi(c) = 0.
double k_of_c(const BehavioralModel& m, double c, const SolverOptions& opts = {});

/// G(c) = (k- T-(1 - F(c)) / E[rho 1{rho > c}]^alpha)^{1/(1-alpha)} - phi(c), c >= 0.
double g_of_c(const BehavioralModel& m, double c, const SolverOptions& opts = {});

/// Assumption audit used by classification and the CLI.
ValidationReport audit_model(const BehavioralModel& m);

Classification classify_wellposedness(const BehavioralModel& m, const SolverOptions& opts = {});

/// Full solve. CRRA utilities use the closed-form path; others the nested
/// numerical search over (c, x+).
Classification solve_master(const BehavioralModel& m, const SolverOptions& opts = {});

/// Nested numerical search regardless of the utility family.
Classification solve_master_general(const BehavioralModel& m, const SolverOptions& opts = {});

/// V+(X) - V-(X) of a threshold claim, by quadrature against the distortions.
double claim_value(const BehavioralModel& m, const TerminalClaim& x);

/// Objective of the master program at (c, x+): v+(c, x+) minus the loss
/// term with the loss event {rho > c}.
double master_objective(const BehavioralModel& m, const Threshold& c, double x_plus,
                        const SolverOptions& opts = {});

}  // namespace cpt
