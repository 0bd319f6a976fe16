#include "cpt/replication.hpp"

#include <cmath>

namespace cpt {

namespace {

constexpr double kStiffVolatility = 1e-4;

struct Conditional {
  double mu = 0.0;
  double sd = 0.0;
};

Conditional conditional_law(const MarketParams& market, double t) {
  market.validate();
  if (!(t >= 0.0 && t < market.horizon)) throw DomainError("replication: t must lie in [0, T)");
  const double theta2 = market.market_price_of_risk().squaredNorm();
  const double tau = market.horizon - t;
  return {-(market.rate + 0.5 * theta2) * tau, std::sqrt(theta2 * tau)};
}

// c^{a+1} psi(d) with the conventions 0 * anything = 0 at c = 0 or c = inf.
double boundary_term(double a, double c, double log_rho, const Conditional& law) {
  if (c == 0.0 || std::isinf(c)) return 0.0;
  const double d = (std::log(c) - law.mu - log_rho) / law.sd;
  return std::exp((a + 1.0) * std::log(c) + normal_log_pdf(d));
}

}  // namespace

WealthPortfolio replicate_binary_power(const MarketParams& market, double a, double c1,
                                       const Threshold& c2, const PathPoint& p) {
  if (!(p.rho_t > 0.0) || !std::isfinite(p.rho_t)) {
    throw DomainError("replication: rho_t must be positive and finite");
  }
  if (!(c1 >= 0.0)) throw DomainError("replication: c1 must be nonnegative");
  if (!c2.is_infinite() && !(c1 < c2.value())) throw DomainError("replication: need c1 < c2");
  const Conditional law = conditional_law(market, p.t);
  const Eigen::VectorXd direction = market.merton_direction();
  const double log_rho = std::log(p.rho_t);

  WealthPortfolio out;
  if (law.sd < kStiffVolatility) {
    // rho(t, T) is essentially the constant e^{mu_t}.
    const double terminal = p.rho_t * std::exp(law.mu);
    const bool inside = terminal > c1 && (c2.is_infinite() || terminal <= c2.value());
    out.x = inside ? std::exp(a * log_rho + (a + 1.0) * law.mu) : 0.0;
    out.pi = -a * out.x * direction;
    return out;
  }

  // x(t) = rho_t^a E[rho(t,T)^{a+1} 1{c1/rho_t < rho(t,T) <= c2/rho_t}], in the
  // score of ln rho(t, T).
  const double lo = c1 == 0.0 ? -kInf : (std::log(c1) - log_rho - law.mu) / law.sd;
  const double hi = c2.is_infinite() ? kInf : (c2.log() - log_rho - law.mu) / law.sd;
  const auto log_f = [&](double s) {
    return a * log_rho + (a + 1.0) * (law.mu + law.sd * s) + normal_log_pdf(s);
  };
  QuadratureOptions q;
  q.rel_tol = 1e-12;
  const ScoreIntegral r = integrate_score(log_f, lo, hi, {}, q);
  if (!r.converged) {
    throw EvaluationError("replication: pricing integral diverges", r.value);
  }
  out.x = r.value;

  const double edges = boundary_term(a, c2.as_double(), log_rho, law) -
                       boundary_term(a, c1, log_rho, law);
  // rho d/drho of the pricing function.
  const double rho_df = a * out.x - edges / (law.sd * p.rho_t);
  out.pi = -rho_df * direction;
  return out;
}

OptimalPathPoint optimal_path(const OptimalPathParams& params, const PathPoint& p) {
  if (!(params.alpha > 0.0 && params.alpha < 1.0)) {
    throw DomainError("optimal path: alpha must lie in (0, 1)");
  }
  if (!(params.x0 >= 0.0)) throw DomainError("optimal path: requires x0 >= 0 (gains-only regime)");
  if (!(params.c0 > 0.0)) throw DomainError("optimal path: c0 must be positive");
  const double e = 1.0 / (1.0 - params.alpha);
  const double beta1 = (params.a - 1.0) * e;
  const double beta2 = (params.b - 1.0) * e;

  OptimalPathPoint out;
  out.weight = std::pow(params.c0, (params.a - params.b) * e);
  const PricingKernel k0 = PricingKernel::from_market(params.market);
  out.gamma = k0.partial_power_moment(beta1 + 1.0, 0.0, Threshold(params.c0)) +
              out.weight * k0.partial_power_moment(beta2 + 1.0, params.c0, Threshold::infinity());

  const WealthPortfolio w1 =
      replicate_binary_power(params.market, beta1, 0.0, Threshold(params.c0), p);
  const WealthPortfolio w2 =
      replicate_binary_power(params.market, beta2, params.c0, Threshold::infinity(), p);
  out.x1 = w1.x;
  out.x2 = w2.x;
  const double scale = params.x0 / out.gamma;
  out.wp.x = scale * (out.x1 + out.weight * out.x2);
  // The boundary terms at c0 cancel because X* is continuous there.
  out.wp.pi = scale * ((1.0 - params.a) * out.x1 + out.weight * (1.0 - params.b) * out.x2) * e *
              params.market.merton_direction();
  return out;
}

OptimalPathParams optimal_path_params(const BehavioralModel& m) {
  const TwoPieceCrra* u = m.utility.crra();
  if (u == nullptr) throw DomainError("optimal path: closed form needs a two-piece CRRA utility");
  if (m.x0 < 0.0) throw DomainError("optimal path: closed form needs x0 >= 0");
  const ReversedSDistortion* r = m.t_plus.reversed_s_params();
  if (r == nullptr || r->mu != m.kernel.mu() || r->sd != m.kernel.sd()) {
    throw DomainError("optimal path: closed form needs a reversed-S T+ built on the model kernel");
  }
  const Classification cls = classify_wellposedness(m);
  if (cls.tag != Tag::WellPosedAttained || !cls.claim || !cls.claim->c_star.is_infinite()) {
    throw DomainError("optimal path: model is not in the gains-only regime (inf k >= 1, x0 >= 0): " +
                      cls.diagnostic);
  }
  return {m.market, u->alpha, r->c0, r->a, r->b, m.x0};
}

OptimalPathPoint optimal_path(const BehavioralModel& m, const PathPoint& p) {
  return optimal_path(optimal_path_params(m), p);
}

Eigen::VectorXd risky_ratio(const OptimalPathParams& params, const PathPoint& p) {
  const OptimalPathPoint o = optimal_path(params, p);
  if (!(o.wp.x > 0.0)) throw DomainError("risky ratio: wealth is zero, ratio undefined");
  const double mix = (params.a * o.x1 + params.b * o.weight * o.x2) / (o.x1 + o.weight * o.x2);
  return (1.0 - mix) / (1.0 - params.alpha) * params.market.merton_direction();
}

Eigen::VectorXd merton_ratio(const MarketParams& market, double alpha) {
  if (!(alpha < 1.0)) throw DomainError("merton ratio: (1 - alpha)^{-1} blows up for alpha >= 1");
  if (!(alpha > 0.0)) throw DomainError("merton ratio: alpha must be positive");
  return market.merton_direction() / (1.0 - alpha);
}

}  // namespace cpt
