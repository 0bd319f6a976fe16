#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cpt/kernel.hpp"

using namespace cpt;

namespace {
MarketParams baseline_market() { return MarketParams::single_asset(0.05, 0.04, 0.2, 1.0); }
}  // namespace

TEST_CASE("kernel parameters from a market") {
  auto k = PricingKernel::from_market(baseline_market());
  CHECK(k.mu() == doctest::Approx(-0.07).epsilon(1e-15));
  CHECK(k.sd() == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(baseline_market().market_price_of_risk()(0) == doctest::Approx(0.2));

  auto k2 = PricingKernel::from_market(MarketParams::single_asset(0.0, 0.08, 0.4, 4.0));
  CHECK(k2.mu() == doctest::Approx(-0.08).epsilon(1e-15));
  CHECK(k2.sd() == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("degenerate kernel is rejected") {
  CHECK_THROWS_AS(PricingKernel::from_market(MarketParams::single_asset(0.05, 0.0, 0.2, 1.0)),
                  ModelError);
  CHECK_THROWS_AS(PricingKernel(0.0, 0.0), ModelError);
  MarketParams singular;
  singular.rate = 0.05;
  singular.excess_return = Eigen::Vector2d(0.04, 0.04);
  singular.volatility = Eigen::Matrix2d::Constant(0.2);
  CHECK_THROWS_AS(singular.validate(), ModelError);
}

TEST_CASE("cdf, sf and quantile") {
  PricingKernel k(-0.07, 0.2);
  CHECK(k.cdf(std::exp(-0.07)) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(k.cdf(1e-300) == doctest::Approx(0.0));
  CHECK(k.cdf(1e300) == doctest::Approx(1.0));
  CHECK_THROWS_AS(k.cdf(0.0), DomainError);
  CHECK_THROWS_AS(k.cdf(-1.0), DomainError);
  CHECK(k.cdf(kInf) == 1.0);
  CHECK(k.sf(Threshold::infinity()) == 0.0);
  // Phi(0.35) from erfc
  CHECK(k.cdf(1.0) == doctest::Approx(0.5 * std::erfc(-0.35 / std::sqrt(2.0))).epsilon(1e-14));
  CHECK(k.quantile(0.5) == doctest::Approx(std::exp(-0.07)).epsilon(1e-14));
  for (int i = 1; i <= 99; ++i) {
    double p = i / 100.0;
    CHECK(k.cdf(k.quantile(p)) == doctest::Approx(p).epsilon(1e-12));
  }
  // 0.975 quantile of the standard normal by bisection on erfc
  double lo = 0.0, hi = 5.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < 0.975 ? lo : hi) = mid;
  }
  PricingKernel std_k(0.0, 1.0);
  CHECK(std::log(std_k.quantile(0.975)) == doctest::Approx(lo).epsilon(1e-12));
  CHECK(lo == doctest::Approx(1.959964).epsilon(1e-6));
}

TEST_CASE("cdf at x = 1 agrees with a Monte Carlo estimate") {
  PricingKernel k(-0.07, 0.2);
  std::mt19937_64 rng(20260101);
  std::normal_distribution<double> z;
  const int n = 10'000'000;
  int below = 0;
  for (int i = 0; i < n; ++i) below += (-0.07 + 0.2 * z(rng) <= 0.0);
  double est = static_cast<double>(below) / n;
  // standard error ~ 1.4e-4
  CHECK(std::abs(est - k.cdf(1.0)) < 6e-4);
}

TEST_CASE("partial power moments") {
  PricingKernel k = PricingKernel::from_market(baseline_market());
  CHECK(k.mean() == doctest::Approx(std::exp(-0.05)).epsilon(1e-14));
  CHECK(k.partial_power_moment(0.0, 0.5, 1.2) == doctest::Approx(k.cdf(1.2) - k.cdf(0.5)).epsilon(1e-13));
  CHECK(k.partial_power_moment(2.0, 0.0, 0.0) == 0.0);

  // E[rho^-1 1{rho <= 1}] against Monte Carlo, 3 significant digits
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z;
  const int n = 10'000'000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    double rho = std::exp(-0.07 + 0.2 * z(rng));
    if (rho <= 1.0) sum += 1.0 / rho;
  }
  double mc = sum / n;
  double exact = k.partial_power_moment(-1.0, 0.0, 1.0);
  CHECK(std::abs(mc - exact) / exact < 5e-4);
  // closed form by hand: e^{-mu + sd^2/2} Phi((0 - mu + sd^2)/sd)
  double by_hand = std::exp(0.07 + 0.02) * 0.5 * std::erfc(-((0.07 + 0.04) / 0.2) / std::sqrt(2.0));
  CHECK(exact == doctest::Approx(by_hand).epsilon(1e-13));
}

TEST_CASE("conditional kernel and thresholds") {
  auto m = baseline_market();
  auto kt = PricingKernel::conditional(m, 0.75);
  CHECK(kt.mu() == doctest::Approx(-0.07 * 0.25));
  CHECK(kt.sd() == doctest::Approx(0.2 * 0.5));
  CHECK(Threshold::infinity().is_infinite());
  CHECK_THROWS_AS(Threshold::infinity().value(), DomainError);
  CHECK(Threshold(0.0).log() == -kInf);
  CHECK(Threshold::infinity().log() == kInf);
}

TEST_CASE("merton direction for two assets") {
  MarketParams m;
  m.rate = 0.05;
  m.excess_return = Eigen::Vector2d(0.04, 0.09);
  m.volatility = Eigen::Vector2d(0.2, 0.3).asDiagonal();
  auto d = m.merton_direction();
  CHECK(d(0) == doctest::Approx(1.0));
  CHECK(d(1) == doctest::Approx(1.0));
}
