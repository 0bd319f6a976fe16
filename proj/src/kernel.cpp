#include "cpt/kernel.hpp"

#include <cmath>

namespace cpt {

MarketParams MarketParams::single_asset(double rate, double excess_return, double volatility,
                                        double horizon) {
  MarketParams m;
  m.rate = rate;
  m.excess_return = Eigen::VectorXd::Constant(1, excess_return);
  m.volatility = Eigen::MatrixXd::Constant(1, 1, volatility);
  m.horizon = horizon;
  return m;
}

Eigen::VectorXd MarketParams::market_price_of_risk() const {
  if (volatility.rows() != volatility.cols() || volatility.rows() == 0) {
    throw ModelError("market: volatility matrix must be square and non-empty");
  }
  if (excess_return.size() != volatility.rows()) {
    throw ModelError("market: excess return dimension does not match volatility");
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(volatility);
  if (!lu.isInvertible()) throw ModelError("market: volatility matrix is singular");
  return lu.solve(excess_return);
}

Eigen::VectorXd MarketParams::merton_direction() const {
  const Eigen::MatrixXd cov = volatility * volatility.transpose();
  market_price_of_risk();  // dimension and rank checks
  return cov.fullPivLu().solve(excess_return);
}

void MarketParams::validate() const {
  if (!std::isfinite(rate)) throw ModelError("market: rate must be finite");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw ModelError("market: horizon must be positive");
  }
  const Eigen::VectorXd theta = market_price_of_risk();
  if (!theta.allFinite()) throw ModelError("market: non-finite market price of risk");
  if (!(theta.norm() > 0.0)) throw ModelError("market: degenerate kernel (|theta| = 0)");
}

Threshold::Threshold(double value) : value_(value), infinite_(false) {
  if (std::isinf(value) && value > 0) {
    infinite_ = true;
    value_ = 0.0;
  } else if (!(value >= 0.0)) {
    throw DomainError("threshold must be nonnegative");
  }
}

double Threshold::value() const {
  if (infinite_) throw DomainError("threshold is infinite");
  return value_;
}

double Threshold::log() const {
  if (infinite_) return kInf;
  return value_ == 0.0 ? -kInf : std::log(value_);
}

PricingKernel::PricingKernel(double mu, double sd) : mu_(mu), sd_(sd) {
  if (!std::isfinite(mu) || !std::isfinite(sd)) {
    throw ModelError("pricing kernel: parameters must be finite");
  }
  if (!(sd > 0.0)) throw ModelError("pricing kernel: degenerate kernel (sd must be > 0)");
}

PricingKernel PricingKernel::from_market(const MarketParams& m) { return conditional(m, 0.0); }

PricingKernel PricingKernel::conditional(const MarketParams& m, double t) {
  m.validate();
  if (!(t >= 0.0 && t < m.horizon)) {
    throw DomainError("pricing kernel: time must lie in [0, T)");
  }
  const double theta2 = m.market_price_of_risk().squaredNorm();
  const double tau = m.horizon - t;
  return PricingKernel(-(m.rate + 0.5 * theta2) * tau, std::sqrt(theta2 * tau));
}

double PricingKernel::score(double x) const {
  if (x == 0.0) return -kInf;
  if (std::isinf(x)) return kInf;
  return (std::log(x) - mu_) / sd_;
}

double PricingKernel::level(double s) const { return std::exp(mu_ + sd_ * s); }

double PricingKernel::pdf(double x) const {
  if (!(x > 0.0)) throw DomainError("pricing kernel pdf: x must be positive");
  return normal_pdf(score(x)) / (sd_ * x);
}

double PricingKernel::cdf(double x) const {
  if (!(x > 0.0)) throw DomainError("pricing kernel cdf: x must be positive");
  return normal_cdf(score(x));
}

double PricingKernel::sf(double x) const {
  if (!(x > 0.0)) throw DomainError("pricing kernel sf: x must be positive");
  return normal_sf(score(x));
}

double PricingKernel::sf(const Threshold& x) const {
  if (x.is_infinite()) return 0.0;
  if (x.value() == 0.0) return 1.0;
  return sf(x.value());
}

double PricingKernel::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("pricing kernel quantile: p must lie in (0, 1)");
  return level(normal_quantile(p));
}

double PricingKernel::partial_power_moment(double beta, double a, const Threshold& b) const {
  if (!(a >= 0.0)) throw DomainError("partial_power_moment: lower limit must be nonnegative");
  if (!b.is_infinite() && a > b.value()) {
    throw DomainError("partial_power_moment: lower limit exceeds upper limit");
  }
  const double shift = mu_ + beta * sd_ * sd_;
  const double lo = a == 0.0 ? -kInf : (std::log(a) - shift) / sd_;
  const double hi = b.is_infinite() || b.value() == kInf ? kInf
                    : b.value() == 0.0                   ? -kInf
                                                         : (b.log() - shift) / sd_;
  const double mass = normal_interval(lo, hi);
  if (mass == 0.0) return 0.0;
  return std::exp(beta * mu_ + 0.5 * beta * beta * sd_ * sd_ + std::log(mass));
}

}  // namespace cpt
