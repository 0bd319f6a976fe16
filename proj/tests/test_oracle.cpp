#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cpt/oracle.hpp"

using namespace cpt;

namespace {

MarketParams market() { return MarketParams::single_asset(0.05, 0.04, 0.2, 1.0); }

BehavioralModel baseline(double x0) {
  auto k = PricingKernel::from_market(market());
  return BehavioralModel(market(), SShapedUtility::two_piece_crra(0.88, 2.25),
                         build_reversed_s(k, 1.0, -0.5, 0.5), Distortion::tversky_kahneman(0.69), x0);
}

OraclePreferences prefs_of(const BehavioralModel& m) { return {m.utility, m.t_plus, m.t_minus}; }

}  // namespace

TEST_CASE("discretisation preserves the mean and orders the bands") {
  PricingKernel k(-0.07, 0.2);
  for (Scheme s : {Scheme::EqualProb, Scheme::StratifiedTail}) {
    auto e = discretize(k, 10, s);
    e.validate();
    CHECK(e.mean_rho() == doctest::Approx(k.mean()).epsilon(1e-12));
    for (std::size_t i = 1; i < e.size(); ++i) CHECK(e.states[i].rho > e.states[i - 1].rho);
  }
  auto eq = discretize(k, 10, Scheme::EqualProb);
  for (const auto& st : eq.states) CHECK(st.prob == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("equal-probability band means agree with Monte Carlo") {
  PricingKernel k(-0.07, 0.2);
  const std::size_t n = 200;
  auto e = discretize(k, n, Scheme::EqualProb);
  std::vector<double> sum(n, 0.0);
  std::vector<long> cnt(n, 0);
  std::mt19937_64 rng(31337);
  std::normal_distribution<double> z;
  for (int i = 0; i < 10'000'000; ++i) {
    double s = z(rng);
    auto band = static_cast<std::size_t>(normal_cdf(s) * n);
    band = std::min(band, n - 1);
    sum[band] += std::exp(-0.07 + 0.2 * s);
    ++cnt[band];
  }
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(sum[i] / cnt[i] == doctest::Approx(e.states[i].rho).epsilon(1e-3));
  }
}

TEST_CASE("identity gain distortion gives the discrete classical solution") {
  PricingKernel k(-0.07, 0.2);
  auto e = discretize(k, 20, Scheme::EqualProb);
  OraclePreferences p{SShapedUtility::two_piece_crra(0.5, 10.0), Distortion::identity(), Distortion::identity()};
  auto r = brute_force_master(e, p, 1.0);
  REQUIRE(r.tag == Tag::WellPosedAttained);
  // u'(x_i) proportional to rho_i, i.e. x_i rho_i^2 constant
  double c0 = r.claim[0] * e.states[0].rho * e.states[0].rho;
  for (std::size_t i = 0; i < e.size(); ++i) {
    CHECK(r.claim[i] * e.states[i].rho * e.states[i].rho == doctest::Approx(c0).epsilon(1e-9));
  }
  CHECK(e.price(r.claim) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero endowment: the best claim is zero") {
  auto m = baseline(0.0);
  auto e = discretize(m.kernel, 100, Scheme::StratifiedTail);
  auto r = brute_force_master(e, prefs_of(m), 0.0);
  CHECK(r.tag == Tag::WellPosedAttained);
  CHECK(std::abs(r.value) < 1e-12);
  for (double x : r.claim) CHECK(x == 0.0);
}

TEST_CASE("negative endowment: oracle matches the continuous solver") {
  auto m = baseline(-1.0);
  auto sol = solve_master(m);
  REQUIRE(sol.claim.has_value());
  auto e = discretize(m.kernel, 200, Scheme::StratifiedTail);
  auto r = brute_force_master(e, prefs_of(m), -1.0);
  REQUIRE(r.tag == Tag::WellPosedAttained);
  CHECK(std::abs(r.value - sol.value) / std::abs(sol.value) < 0.01);
  // the band holding c* borders the split
  double c_star = sol.claim->c_star.as_double();
  std::size_t band = 0;
  while (band + 1 < e.size() && e.states[band + 1].rho <= c_star) ++band;
  CHECK(std::abs(static_cast<long>(r.split) - static_cast<long>(band + 1)) <= 1);
  CHECK(verify_structure(e, r.claim).passed());
  CHECK(e.price(r.claim) == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(r.local_improvement < 1e-3);
}

TEST_CASE("structure checks") {
  auto m = baseline(-1.0);
  auto e = discretize(m.kernel, 200, Scheme::StratifiedTail);
  auto sol = solve_master(m);
  std::vector<double> claim;
  for (const auto& s : e.states) claim.push_back(sol.claim->payoff(s.rho));
  CHECK(verify_structure(e, claim).passed());

  auto small = discretize(m.kernel, 6, Scheme::EqualProb);
  std::vector<double> shuffled{1.0, 3.0, 2.0, 0.0, -1.0, -1.0};
  auto r = verify_structure(small, shuffled);
  const CheckResult* c = r.find("gains_nonincreasing_in_rho");
  REQUIRE(c != nullptr);
  CHECK(c->status == CheckStatus::Fail);
  CHECK_FALSE(c->witness.empty());

  std::vector<double> two_levels{3.0, 2.0, 0.0, -1.0, -2.0, -2.0};
  CHECK_FALSE(verify_structure(small, two_levels).passed("single_loss_level_on_upper_set"));
}

TEST_CASE("arrangements are optimal over all permutations") {
  PricingKernel k(-0.07, 0.2);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> val(0.0, 5.0);
  for (std::size_t n = 2; n <= 8; ++n) {
    auto e = discretize(k, n, Scheme::EqualProb);
    std::vector<double> v(n);
    for (auto& x : v) x = val(rng);
    auto r = exhaustive_arrangement_check(e, v);
    CHECK(r.arrangement_price == r.min_price);
    CHECK(r.comonotone_price == r.max_price);
    std::size_t fact = 1;
    for (std::size_t i = 2; i <= n; ++i) fact *= i;
    CHECK(r.permutations == fact);
  }
}

TEST_CASE("ill-posed escalation with undistorted-tail losses") {
  auto k = PricingKernel::from_market(market());
  OraclePreferences p{SShapedUtility::two_piece_crra(0.88, 2.25), build_reversed_s(k, 1.0, -0.5, 0.5),
                      build_reversed_s(k, 1.0, -0.5, 0.5)};
  auto e = discretize(k, 50, Scheme::StratifiedTail);
  auto r = brute_force_master(e, p, 1.0);
  CHECK(r.tag == Tag::IllPosed);
  for (std::size_t i = 1; i < r.escalation_values.size(); ++i)
    CHECK(r.escalation_values[i] > r.escalation_values[i - 1]);
  CHECK_THROWS_AS(brute_force_master(discretize(k, 401, Scheme::EqualProb), p, 1.0), DomainError);
}

TEST_CASE("discrete CPT value of simple claims") {
  PricingKernel k(-0.07, 0.2);
  auto e = discretize(k, 4, Scheme::EqualProb);
  auto u = SShapedUtility::two_piece_crra(0.5, 2.0);
  std::vector<double> c{4.0, 0.0, 0.0, -1.0};
  // identity distortions: expected utility
  double v = discrete_cpt_value(e, c, u, Distortion::identity(), Distortion::identity());
  CHECK(v == doctest::Approx(0.25 * 2.0 - 0.25 * 2.0).epsilon(1e-14));
}
