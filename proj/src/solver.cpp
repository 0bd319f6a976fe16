#include "cpt/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cpt {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(8);
  os << v;
  return os.str();
}

const TwoPieceCrra& require_crra(const BehavioralModel& m, const char* who) {
  const TwoPieceCrra* c = m.utility.crra();
  if (c == nullptr) throw DomainError(std::string(who) + ": requires a two-piece CRRA utility");
  return *c;
}

// Score-space positions of the kinks of T+'(F(.)).
std::vector<double> gain_kinks(const BehavioralModel& m) {
  std::vector<double> out;
  for (double x : m.t_plus.state_kinks(m.kernel)) out.push_back(m.kernel.score(x));
  std::sort(out.begin(), out.end());
  return out;
}

double upper_score(const PricingKernel& k, const Threshold& c) {
  if (c.is_infinite()) return kInf;
  if (c.value() == 0.0) return -kInf;
  return k.score(c.value());
}

// E[rho 1{rho > c}].
double upper_price(const PricingKernel& k, const Threshold& c) {
  if (c.is_infinite()) return 0.0;
  return k.partial_power_moment(1.0, c.value(), Threshold::infinity());
}

// Budget and value of the gain profile X = I(lambda rho / T+'(F(rho))) on {rho <= c}.
struct GainIntegrals {
  double budget = 0.0;
  double value = 0.0;
  bool converged = true;
};

double log_gain_level(const BehavioralModel& m, double lambda, double s) {
  const double lx = m.kernel.mu() + m.kernel.sd() * s;
  const double lw = m.t_plus.log_state_weight(m.kernel, s);
  const double y = lambda * std::exp(lx - lw);
  const double x = m.utility.gain_prime_inverse(y);
  return x > 0.0 ? std::log(x) : -kInf;
}

double gain_budget(const BehavioralModel& m, const Threshold& c, double lambda,
                   const std::vector<double>& kinks, const SolverOptions& opts, bool* converged) {
  const double mu = m.kernel.mu();
  const double sd = m.kernel.sd();
  const auto log_f = [&](double s) {
    return log_gain_level(m, lambda, s) + mu + sd * s + normal_log_pdf(s);
  };
  const ScoreIntegral r = integrate_score(log_f, -kInf, upper_score(m.kernel, c), kinks, opts.quad);
  if (converged != nullptr) *converged = r.converged;
  return r.value;
}

double gain_value(const BehavioralModel& m, const Threshold& c, double lambda,
                  const std::vector<double>& kinks, const SolverOptions& opts) {
  const auto log_f = [&](double s) {
    const double lx = log_gain_level(m, lambda, s);
    if (lx == -kInf) return -kInf;
    const double u = m.utility.gain(std::exp(lx));
    if (!(u > 0.0)) return -kInf;
    return std::log(u) + m.t_plus.log_state_weight(m.kernel, s) + normal_log_pdf(s);
  };
  const ScoreIntegral r = integrate_score(log_f, -kInf, upper_score(m.kernel, c), kinks, opts.quad);
  if (!r.converged) return kInf;
  return r.value;
}

std::function<double(double)> gain_profile_fn(const BehavioralModel& m, const Threshold& c,
                                              double lambda) {
  const PricingKernel k = m.kernel;
  const Distortion t = m.t_plus;
  const SShapedUtility u = m.utility;
  return [k, t, u, c, lambda](double rho) {
    if (!(rho > 0.0)) return kInf;
    if (!c.is_infinite() && rho > c.value()) return 0.0;
    const double s = k.score(rho);
    const double y = lambda * std::exp(std::log(rho) - t.log_state_weight(k, s));
    return u.gain_prime_inverse(y);
  };
}

// Loss-side objective h(c_bar) for loss budget `loss_budget` > 0.
double loss_objective(const BehavioralModel& m, double c_bar, double loss_budget) {
  const double e = upper_price(m.kernel, Threshold(c_bar));
  if (!(e > 0.0)) return kInf;
  const double q = c_bar == 0.0 ? 1.0 : m.kernel.sf(c_bar);
  return m.utility.loss(loss_budget / e) * m.t_minus(q);
}

}  // namespace

// ---------------------------------------------------------------------------

BehavioralModel::BehavioralModel(MarketParams market_, SShapedUtility utility_,
                                 Distortion t_plus_, Distortion t_minus_, double x0_)
    : market(std::move(market_)),
      kernel(PricingKernel::from_market(market)),
      utility(std::move(utility_)),
      t_plus(std::move(t_plus_)),
      t_minus(std::move(t_minus_)),
      x0(x0_) {
  if (!std::isfinite(x0)) throw DomainError("model: x0 must be finite");
}

bool BehavioralModel::is_waived(const std::string& check) const {
  return std::find(waived.begin(), waived.end(), check) != waived.end();
}

double TerminalClaim::payoff(double rho) const {
  if (!c_star.is_infinite() && rho > c_star.value()) return -loss_level;
  return gain_profile ? gain_profile(rho) : 0.0;
}

double TerminalClaim::budget(const PricingKernel& k) const {
  double gains = 0.0;
  if (gain_profile && x_plus_star > 0.0) {
    const auto log_f = [&](double s) {
      const double x = gain_profile(k.level(s));
      if (!(x > 0.0)) return -kInf;
      return std::log(x) + k.mu() + k.sd() * s + normal_log_pdf(s);
    };
    QuadratureOptions q;
    q.rel_tol = 1e-10;
    gains = integrate_score(log_f, -kInf, upper_score(k, c_star), {}, q).value;
  }
  return gains - loss_level * upper_price(k, c_star);
}

std::string to_string(Tag t) {
  switch (t) {
    case Tag::WellPosedAttained:
      return "WellPosedAttained";
    case Tag::WellPosedUnattained:
      return "WellPosedUnattained";
    case Tag::IllPosed:
      return "IllPosed";
    case Tag::Borderline:
      return "Borderline";
    case Tag::Unknown:
      return "Unknown";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Positive part

double phi(const BehavioralModel& m, const Threshold& c, const SolverOptions& opts) {
  const TwoPieceCrra& u = require_crra(m, "phi");
  if (!c.is_infinite() && c.value() == 0.0) return 0.0;
  const double e = 1.0 / (1.0 - u.alpha);
  const double mu = m.kernel.mu();
  const double sd = m.kernel.sd();
  const auto log_f = [&](double s) {
    const double lx = mu + sd * s;
    return e * (m.t_plus.log_state_weight(m.kernel, s) - lx) + lx + normal_log_pdf(s);
  };
  const ScoreIntegral r =
      integrate_score(log_f, -kInf, upper_score(m.kernel, c), gain_kinks(m), opts.quad);
  return r.converged ? r.value : kInf;
}

PositivePart solve_positive_part(const BehavioralModel& m, const Threshold& c, double x_plus,
                                 const SolverOptions& opts) {
  if (!(x_plus >= 0.0) || !std::isfinite(x_plus)) {
    throw DomainError("positive part: x_plus must be finite and nonnegative");
  }
  PositivePart out;
  if (x_plus == 0.0) {
    out.gain_profile = [](double) { return 0.0; };
    return out;
  }
  if (!c.is_infinite() && c.value() == 0.0) {
    // No state carries gains, but the budget is positive.
    out.feasible = false;
    out.v_plus = -kInf;
    out.gain_profile = [](double) { return 0.0; };
    return out;
  }

  if (const TwoPieceCrra* u = m.utility.crra()) {
    const double ph = phi(m, c, opts);
    if (!std::isfinite(ph)) {
      throw EvaluationError("positive part: phi(c) diverges (gain-side integrability fails)", ph);
    }
    out.lambda = u->alpha * std::pow(x_plus / ph, u->alpha - 1.0);
    out.v_plus = std::pow(ph, 1.0 - u->alpha) * std::pow(x_plus, u->alpha);
    out.gain_profile = gain_profile_fn(m, c, out.lambda);
    return out;
  }

  // General utility: bisection on ln lambda; the budget is strictly decreasing.
  const std::vector<double> kinks = gain_kinks(m);
  const auto budget = [&](double log_lambda) {
    bool ok = true;
    const double b = gain_budget(m, c, std::exp(log_lambda), kinks, opts, &ok);
    if (!ok) {
      throw EvaluationError("positive part: budget integral diverges at lambda = " +
                                fmt(std::exp(log_lambda)),
                            b);
    }
    return b;
  };
  double lo = 0.0;
  double hi = 0.0;
  double b_lo = budget(lo);
  double b_hi = b_lo;
  std::vector<std::pair<double, double>> samples{{lo, b_lo}};
  int steps = 0;
  while (b_lo < x_plus && steps++ < opts.max_bisection) {
    hi = lo;
    b_hi = b_lo;
    lo -= 2.0;
    b_lo = budget(lo);
    samples.emplace_back(lo, b_lo);
  }
  while (b_hi > x_plus && steps++ < opts.max_bisection) {
    lo = hi;
    b_lo = b_hi;
    hi += 2.0;
    b_hi = budget(hi);
    samples.emplace_back(hi, b_hi);
  }
  if (!(b_lo >= x_plus && b_hi <= x_plus)) {
    std::string curve;
    for (const auto& [l, b] : samples) curve += " (" + fmt(std::exp(l)) + ", " + fmt(b) + ")";
    throw EvaluationError("positive part: could not bracket lambda; budget samples" + curve,
                          x_plus);
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < opts.max_bisection; ++it) {
    mid = 0.5 * (lo + hi);
    const double b = budget(mid);
    if (std::abs(b - x_plus) <= opts.budget_rel_tol * x_plus) break;
    if (b > x_plus) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-15) break;
  }
  out.lambda = std::exp(mid);
  out.v_plus = gain_value(m, c, out.lambda, kinks, opts);
  out.gain_profile = gain_profile_fn(m, c, out.lambda);
  return out;
}

// ---------------------------------------------------------------------------
// Negative part

NegativePart solve_negative_part(const BehavioralModel& m, const Threshold& c, double x_plus,
                                 const SolverOptions& opts) {
  if (x_plus < m.x0) throw DomainError("negative part: x_plus below x0 (negative loss budget)");
  NegativePart out;
  const double loss_budget = x_plus - m.x0;
  if (loss_budget == 0.0) return out;
  if (c.is_infinite()) {
    throw DomainError("negative part: positive loss budget but no loss event (c is infinite)");
  }
  if (!m.utility.loss_strictly_concave_at_zero()) {
    throw ModelError(
        "negative part: loss utility is linear near zero, so the corner-claim characterisation "
        "does not apply");
  }

  const PricingKernel& k = m.kernel;
  const double c_lo = c.value();
  const double s_min = normal_quantile(opts.quantile_lo);
  const double s_max = normal_quantile(opts.quantile_hi);
  const double s_start = c_lo == 0.0 ? s_min : std::max(k.score(c_lo), s_min);

  const auto h_at_score = [&](double s) { return loss_objective(m, k.level(s), loss_budget); };

  double best_c = c_lo;
  double best = loss_objective(m, c_lo, loss_budget);
  std::vector<double> scores;
  if (s_start < s_max) scores = linspace(s_start, s_max, opts.c_grid);
  std::vector<double> hs(scores.size());
  parallel_for(scores.size(), [&](std::size_t i) { hs[i] = h_at_score(scores[i]); });
  std::size_t best_i = scores.size();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (hs[i] < best) {
      best = hs[i];
      best_i = i;
    }
  }
  if (best_i < scores.size()) {
    const double a = scores[best_i == 0 ? 0 : best_i - 1];
    const double b = scores[std::min(best_i + 1, scores.size() - 1)];
    const Minimum r = golden_section_min(h_at_score, a, b, 1e-9);
    if (r.value <= best) {
      best = r.value;
      best_c = k.level(r.x);
    } else {
      best_c = k.level(scores[best_i]);
    }
  }

  // Asymptote probes beyond the grid: h may keep decreasing as c_bar -> inf.
  double tail_min = kInf;
  bool still_falling = true;
  double prev = scores.empty() ? best : hs.back();
  for (double s = std::max(s_max, s_start) + 1.0; s <= 36.0; s += 1.0) {
    const double v = h_at_score(s);
    if (!std::isfinite(v)) break;
    tail_min = std::min(tail_min, v);
    if (v > prev) still_falling = false;
    prev = v;
  }
  if (tail_min < best * (1.0 - 1e-9) && still_falling) {
    out.attained = false;
    out.c_bar = Threshold::infinity();
    out.v_minus = tail_min;
    out.loss_level = 0.0;
    return out;
  }
  out.c_bar = Threshold(best_c);
  out.v_minus = best;
  out.loss_level = loss_budget / upper_price(k, out.c_bar);
  return out;
}

// ---------------------------------------------------------------------------
// CRRA quantities

double k_of_c(const BehavioralModel& m, double c, const SolverOptions& opts) {
  const TwoPieceCrra& u = require_crra(m, "k_of_c");
  if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("k_of_c: c must be positive and finite");
  const double ph = phi(m, Threshold(c), opts);
  if (!(ph > 0.0)) return kInf;
  const double e = upper_price(m.kernel, Threshold(c));
  const double t = m.t_minus(m.kernel.sf(c));
  return std::exp(std::log(u.k_minus) + std::log(t) - (1.0 - u.alpha) * std::log(ph) -
                  u.alpha * std::log(e));
}

double g_of_c(const BehavioralModel& m, double c, const SolverOptions& opts) {
  const TwoPieceCrra& u = require_crra(m, "g_of_c");
  if (!(c >= 0.0) || !std::isfinite(c)) throw DomainError("g_of_c: c must be finite and >= 0");
  const double e = upper_price(m.kernel, Threshold(c));
  const double t = c == 0.0 ? 1.0 : m.t_minus(m.kernel.sf(c));
  const double first =
      std::exp((std::log(u.k_minus) + std::log(t) - u.alpha * std::log(e)) / (1.0 - u.alpha));
  return first - phi(m, Threshold(c), opts);
}

// ---------------------------------------------------------------------------
// Audit

ValidationReport audit_model(const BehavioralModel& m) {
  ValidationReport out;
  const auto merge = [&out](const std::string& prefix, const ValidationReport& r) {
    for (const auto& c : r.checks) out.checks.push_back({prefix + c.name, c.status, c.witness});
  };

  std::vector<double> xs;
  for (double e = -6.0; e <= 6.0 + 1e-12; e += 0.25) xs.push_back(std::pow(10.0, e));
  merge("utility.", validate_utility(m.utility, xs));

  std::vector<double> ps;
  for (double s : linspace(-4.75, 4.75, 39)) ps.push_back(normal_cdf(s));
  merge("t_plus.", validate_distortion(m.t_plus, ps));
  merge("t_minus.", validate_distortion(m.t_minus, ps));

  const MonotonicityResult mono = monotonicity_check(m.kernel, m.t_plus);
  out.add("monotone_ratio", mono.holds,
          mono.violation ? "F^-1(z)/T+'(z) decreases between z=" + fmt(mono.violation->first) +
                               " and z=" + fmt(mono.violation->second)
                         : "");

  const bool trap =
      m.t_minus.kind() == Distortion::Kind::Identity && m.utility.gain_unbounded();
  out.add("loss_distortion_trap", !trap,
          trap ? "undistorted losses with unbounded gain utility: a vanishing loss event can fund "
                 "arbitrarily large gains"
               : "");

  // Value of the lambda = 1 Lagrangian claim; must be finite.
  const double mu = m.kernel.mu();
  const double sd = m.kernel.sd();
  const auto log_f = [&](double s) {
    const double lx = mu + sd * s;
    const double lw = m.t_plus.log_state_weight(m.kernel, s);
    const double x = m.utility.gain_prime_inverse(std::exp(lx - lw));
    if (!(x > 0.0)) return -kInf;
    const double u = m.utility.gain(x);
    if (!(u > 0.0)) return -kInf;
    return std::log(u) + lw + normal_log_pdf(s);
  };
  ScoreIntegral r;
  try {
    r = integrate_score(log_f, -kInf, kInf, gain_kinks(m));
  } catch (const EvaluationError& e) {
    r.converged = false;
  }
  out.add("gain_integrability", r.converged && std::isfinite(r.value),
          r.converged ? "E[u+(I(rho/w)) w] = " + fmt(r.value)
                      : "E[u+(I(rho/w)) w] diverges: distortion overweights extreme gains");

  for (const auto& w : m.waived) out.waive(w);
  return out;
}

// ---------------------------------------------------------------------------
// Classification

namespace {

TerminalClaim assemble_claim(const BehavioralModel& m, const Threshold& c, double x_plus,
                             const SolverOptions& opts) {
  TerminalClaim claim;
  claim.c_star = c;
  claim.x_plus_star = x_plus;
  const PositivePart pos = solve_positive_part(m, c, x_plus, opts);
  if (x_plus > 0.0) claim.lambda_star = pos.lambda;
  claim.gain_profile = pos.gain_profile;
  claim.loss_level = c.is_infinite() ? 0.0 : (x_plus - m.x0) / upper_price(m.kernel, c);
  return claim;
}

}  // namespace

Classification classify_wellposedness(const BehavioralModel& m, const SolverOptions& opts) {
  Classification out;
  out.audit = audit_model(m);

  if (!out.audit.passed("loss_distortion_trap")) {
    out.tag = Tag::IllPosed;
    out.value = kInf;
    out.diagnostic = "loss-weighting trap: " + out.audit.find("loss_distortion_trap")->witness;
    return out;
  }
  if (!out.audit.passed("gain_integrability")) {
    out.tag = Tag::IllPosed;
    out.value = kInf;
    out.diagnostic = "gain-side integrability failure: " +
                     out.audit.find("gain_integrability")->witness;
    return out;
  }
  if (!m.utility.is_crra()) {
    out.tag = Tag::Unknown;
    out.value = std::nan("");
    out.diagnostic = "no closed-form classification for this utility family; run solve for the "
                     "numerical search";
    return out;
  }
  if (!out.audit.passed("monotone_ratio")) {
    out.tag = Tag::Unknown;
    out.value = std::nan("");
    out.diagnostic = "monotone ratio condition fails (" +
                     out.audit.find("monotone_ratio")->witness +
                     "); gain-part solution is not of Lagrangian form";
    return out;
  }

  const TwoPieceCrra& u = *m.utility.crra();
  const PricingKernel& k = m.kernel;

  // k(c) and G(c) over the quantile-spaced grid.
  const std::vector<double> scores = linspace(normal_quantile(opts.quantile_lo),
                                              normal_quantile(opts.quantile_hi), opts.c_grid);
  out.curve.resize(scores.size());
  parallel_for(scores.size(), [&](std::size_t i) {
    const double c = k.level(scores[i]);
    out.curve[i] = {c, k_of_c(m, c, opts), g_of_c(m, c, opts)};
  });

  const auto k_at_score = [&](double s) { return k_of_c(m, k.level(s), opts); };
  const double s_probe_lo = normal_quantile(opts.probe_lo);
  const double s_probe_hi = normal_quantile(opts.probe_hi);
  double inf_k = kInf;
  double inf_s = 0.0;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (out.curve[i].k < inf_k) {
      inf_k = out.curve[i].k;
      inf_s = scores[i];
      arg = i;
    }
  }
  if (arg > 0 && arg + 1 < scores.size()) {
    const Minimum r = golden_section_min(k_at_score, scores[arg - 1], scores[arg + 1], 1e-9);
    if (r.value < inf_k) {
      inf_k = r.value;
      inf_s = r.x;
    }
  }
  for (double s : {s_probe_lo, s_probe_hi}) {
    const double v = k_at_score(s);
    if (v < inf_k) {
      inf_k = v;
      inf_s = s;
    }
  }
  out.inf_k = inf_k;
  out.c_at_inf_k = k.level(inf_s);

  if (std::abs(inf_k - 1.0) < opts.borderline_band) {
    out.tag = Tag::Borderline;
    out.value = std::nan("");
    out.diagnostic = "inf k(c) = " + fmt(inf_k) +
                     " lies within the borderline band around 1; classification is "
                     "discontinuous there";
    return out;
  }

  const double x0 = m.x0;
  if (inf_k < 1.0) {
    out.tag = Tag::IllPosed;
    out.value = kInf;
    out.diagnostic = "inf k(c) = " + fmt(inf_k) + " < 1 at c = " + fmt(out.c_at_inf_k) +
                     ": loss aversion too weak to stop gambling on gains";
    return out;
  }

  if (x0 >= 0.0) {
    const double ph = phi(m, Threshold::infinity(), opts);
    out.tag = Tag::WellPosedAttained;
    out.value = std::pow(ph, 1.0 - u.alpha) * std::pow(x0, u.alpha);
    out.claim = assemble_claim(m, Threshold::infinity(), x0, opts);
    out.diagnostic = "inf k(c) = " + fmt(inf_k) + " >= 1 with x0 >= 0: no loss event, gains "
                     "only" + (x0 == 0.0 ? std::string("; zero endowment means X* = 0") : "");
    return out;
  }

  // x0 < 0 and inf k > 1: minimise G over c >= 0.
  const auto g_at_score = [&](double s) { return g_of_c(m, k.level(s), opts); };
  double g_best = g_of_c(m, 0.0, opts);
  double c_best = 0.0;
  std::size_t g_arg = scores.size();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (out.curve[i].g < g_best) {
      g_best = out.curve[i].g;
      g_arg = i;
    }
  }
  if (g_arg < scores.size()) {
    c_best = out.curve[g_arg].c;
    const double a = scores[g_arg == 0 ? 0 : g_arg - 1];
    const double b = scores[std::min(g_arg + 1, scores.size() - 1)];
    const Minimum r = golden_section_min(g_at_score, a, b, 1e-9);
    if (r.value < g_best) {
      g_best = r.value;
      c_best = k.level(r.x);
    }
  }
  // Does G keep falling beyond the grid?
  double tail_min = kInf;
  bool still_falling = true;
  double prev = out.curve.back().g;
  for (double s = scores.back() + 0.5; s <= s_probe_hi + 2.0; s += 0.5) {
    const double v = g_at_score(s);
    if (!std::isfinite(v)) break;
    tail_min = std::min(tail_min, v);
    if (v > prev) still_falling = false;
    prev = v;
  }
  if (tail_min < g_best * (1.0 - 1e-9) && still_falling) {
    out.tag = Tag::WellPosedUnattained;
    out.value = -std::pow(-x0, u.alpha) * std::pow(tail_min, 1.0 - u.alpha);
    out.diagnostic = "inf k(c) = " + fmt(inf_k) + " > 1 with x0 < 0, but G(c) decreases "
                     "without a minimiser as c grows: supremum not attained";
    return out;
  }

  out.tag = Tag::WellPosedAttained;
  out.value = -std::pow(-x0, u.alpha) * std::pow(g_best, 1.0 - u.alpha);
  if (c_best == 0.0) {
    // Everything in the loss event: the risk-free claim x0 / E[rho].
    TerminalClaim claim;
    claim.c_star = Threshold(0.0);
    claim.x_plus_star = 0.0;
    claim.gain_profile = [](double) { return 0.0; };
    claim.loss_level = -x0 / k.mean();
    out.claim = claim;
    out.diagnostic = "inf k(c) = " + fmt(inf_k) + " > 1 with x0 < 0; G is minimised at c = 0: "
                     "risk-free terminal wealth";
    return out;
  }
  const double kc = k_of_c(m, c_best, opts);
  const double x_plus = -x0 / (std::pow(kc, 1.0 / (1.0 - u.alpha)) - 1.0);
  out.claim = assemble_claim(m, Threshold(c_best), x_plus, opts);
  out.diagnostic = "inf k(c) = " + fmt(inf_k) + " > 1 with x0 < 0; G attains its minimum " +
                   fmt(g_best) + " at c* = " + fmt(c_best);
  return out;
}

// ---------------------------------------------------------------------------
// Master program

double master_objective(const BehavioralModel& m, const Threshold& c, double x_plus,
                        const SolverOptions& opts) {
  if (x_plus < std::max(m.x0, 0.0)) throw DomainError("master objective: x_plus below max(x0, 0)");
  if (c.is_infinite()) {
    if (x_plus != m.x0) return -kInf;
    return solve_positive_part(m, c, x_plus, opts).v_plus;
  }
  const PositivePart pos = solve_positive_part(m, c, x_plus, opts);
  if (!pos.feasible) return -kInf;
  const double loss_budget = x_plus - m.x0;
  const double loss = loss_budget == 0.0 ? 0.0 : loss_objective(m, c.value(), loss_budget);
  return pos.v_plus - loss;
}

Classification solve_master(const BehavioralModel& m, const SolverOptions& opts) {
  Classification cls = classify_wellposedness(m, opts);
  if (cls.tag != Tag::Unknown) return cls;
  Classification gen = solve_master_general(m, opts);
  gen.audit = cls.audit;
  return gen;
}

Classification solve_master_general(const BehavioralModel& m, const SolverOptions& opts) {
  Classification out;
  const PricingKernel& k = m.kernel;
  const double x0 = m.x0;
  const double x_lo = std::max(x0, 0.0);
  const double scale = 1.0 + std::abs(x0);
  const double x_max = x_lo + opts.x_plus_max_factor * scale;

  struct Cell {
    double value = -kInf;
    double x_plus = 0.0;
    bool at_cap = false;
  };

  // Inner search over t = ln(x_plus - x_lo) for fixed finite c.
  const double t_lo = std::log(1e-6 * scale);
  const double t_hi = std::log(x_max - x_lo);
  const auto inner = [&](double c) {
    const Threshold th(c);
    const auto f = [&](double t) {
      const double xp = x_lo + std::exp(t);
      return master_objective(m, th, xp, opts);
    };
    Cell best;
    // x_plus at its floor.
    if (c > 0.0 || x_lo == 0.0) {
      const double v = master_objective(m, th, x_lo, opts);
      if (v > best.value) best = {v, x_lo, false};
    }
    if (c == 0.0) return best;
    const std::vector<double> ts = linspace(t_lo, t_hi, opts.general_x_grid);
    std::vector<double> vs(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) vs[i] = f(ts[i]);
    std::size_t arg = ts.size();
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (vs[i] > best.value) {
        best = {vs[i], x_lo + std::exp(ts[i]), false};
        arg = i;
      }
    }
    if (arg == ts.size()) return best;
    if (arg + 1 == ts.size()) {
      best.at_cap = vs[arg] > vs[arg - 1];
      return best;
    }
    const double a = ts[arg == 0 ? 0 : arg - 1];
    const double b = ts[arg + 1];
    const Minimum r = golden_section_min([&](double t) { return -f(t); }, a, b, 1e-7);
    if (-r.value > best.value) best = {-r.value, x_lo + std::exp(r.x), false};
    return best;
  };

  // Outer grid over c.
  const std::vector<double> scores = linspace(normal_quantile(1e-4), normal_quantile(1.0 - 1e-4),
                                              opts.general_c_grid);
  std::vector<Cell> cells(scores.size());
  parallel_for(scores.size(), [&](std::size_t i) { cells[i] = inner(k.level(scores[i])); });

  double best_value = -kInf;
  double best_x = x_lo;
  Threshold best_c = Threshold::infinity();
  bool at_cap = false;

  // Candidates without a loss event, and with the whole space in the loss event.
  if (x0 >= 0.0) {
    best_value = master_objective(m, Threshold::infinity(), x0, opts);
    best_x = x0;
  }
  {
    const Cell zero = inner(0.0);
    if (zero.value > best_value) {
      best_value = zero.value;
      best_x = zero.x_plus;
      best_c = Threshold(0.0);
    }
  }
  std::size_t arg = scores.size();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (cells[i].at_cap) at_cap = true;
    if (cells[i].value > best_value) {
      best_value = cells[i].value;
      best_x = cells[i].x_plus;
      best_c = Threshold(k.level(scores[i]));
      arg = i;
    }
  }
  if (at_cap) {
    out.tag = Tag::IllPosed;
    out.value = kInf;
    out.diagnostic = "master objective still increasing at the x_plus cap " + fmt(x_max) +
                     ": gains can be scaled without bound";
    return out;
  }
  if (arg < scores.size() && arg > 0 && arg + 1 < scores.size()) {
    const Minimum r = golden_section_min(
        [&](double s) { return -inner(k.level(s)).value; }, scores[arg - 1], scores[arg + 1], 1e-6);
    if (-r.value > best_value) {
      const Cell c = inner(k.level(r.x));
      best_value = c.value;
      best_x = c.x_plus;
      best_c = Threshold(k.level(r.x));
    }
  }

  out.tag = Tag::WellPosedAttained;
  out.value = best_value;
  if (best_c.is_infinite() || best_c.value() > 0.0 || best_x > 0.0) {
    out.claim = assemble_claim(m, best_c, best_x, opts);
  } else {
    TerminalClaim claim;
    claim.c_star = Threshold(0.0);
    claim.gain_profile = [](double) { return 0.0; };
    claim.loss_level = -x0 / k.mean();
    out.claim = claim;
  }
  out.diagnostic = "numerical search over (c, x_plus): c* = " + fmt(best_c.as_double()) +
                   ", x_plus* = " + fmt(best_x);
  if (arg + 1 == scores.size()) out.diagnostic += " (optimum on the upper edge of the c grid)";
  return out;
}

double claim_value(const BehavioralModel& m, const TerminalClaim& x) {
  const PricingKernel& k = m.kernel;
  double v_plus = 0.0;
  if (x.gain_profile && x.x_plus_star > 0.0) {
    const auto log_f = [&](double s) {
      const double g = x.gain_profile(k.level(s));
      if (!(g > 0.0)) return -kInf;
      const double u = m.utility.gain(g);
      if (!(u > 0.0)) return -kInf;
      return std::log(u) + m.t_plus.log_state_weight(k, s) + normal_log_pdf(s);
    };
    QuadratureOptions q;
    q.rel_tol = 1e-10;
    const ScoreIntegral r = integrate_score(log_f, -kInf, upper_score(k, x.c_star), gain_kinks(m), q);
    v_plus = r.converged ? r.value : kInf;
  }
  double v_minus = 0.0;
  if (!x.c_star.is_infinite() && x.loss_level > 0.0) {
    const double q = x.c_star.value() == 0.0 ? 1.0 : k.sf(x.c_star.value());
    v_minus = m.utility.loss(x.loss_level) * m.t_minus(q);
  }
  return v_plus - v_minus;
}

}  // namespace cpt
