#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cpt/oracle.hpp"
#include "cpt/solver.hpp"

using namespace cpt;

namespace {

const double kAlpha = 0.88;
const double kLoss = 2.25;

MarketParams market() { return MarketParams::single_asset(0.05, 0.04, 0.2, 1.0); }
PricingKernel kernel() { return PricingKernel::from_market(market()); }

BehavioralModel baseline(double x0) {
  auto k = kernel();
  return BehavioralModel(market(), SShapedUtility::two_piece_crra(kAlpha, kLoss),
                         build_reversed_s(k, 1.0, -0.5, 0.5), Distortion::tversky_kahneman(0.69), x0);
}

// E[rho^beta 1{lo < rho <= hi}] for ln rho ~ N(mu, sd^2), by hand.
double moment(double beta, double lo, double hi, double mu = -0.07, double sd = 0.2) {
  auto d = [&](double x) {
    if (x <= 0.0) return -kInf;
    if (std::isinf(x)) return kInf;
    return (std::log(x) - mu - beta * sd * sd) / sd;
  };
  auto phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  return std::exp(beta * mu + 0.5 * beta * beta * sd * sd) * (phi(d(hi)) - phi(d(lo)));
}

// phi(c) for the reversed-S family on the baseline kernel via two power branches.
double phi_closed(double c, double kappa, double a = -0.5, double b = 0.5, double c0 = 1.0) {
  double e = 1.0 / (1.0 - kAlpha);
  double lower = std::pow(kappa, e) * moment((a - 1.0) * e + 1.0, 0.0, std::min(c, c0));
  double upper = 0.0;
  if (c > c0)
    upper = std::pow(kappa * std::pow(c0, a - b), e) * moment((b - 1.0) * e + 1.0, c0, c);
  return lower + upper;
}

}  // namespace

TEST_CASE("phi with identity T+ is a power moment; vanishes at 0") {
  auto k = kernel();
  BehavioralModel m(market(), SShapedUtility::two_piece_crra(kAlpha, kLoss), Distortion::identity(),
                    Distortion::power(0.4), 1.0);
  double beta = -kAlpha / (1.0 - kAlpha);
  CHECK(phi(m, Threshold::infinity()) == doctest::Approx(moment(beta, 0.0, kInf)).epsilon(1e-9));
  CHECK(phi(m, 0.9) == doctest::Approx(moment(beta, 0.0, 0.9)).epsilon(1e-9));
  CHECK(phi(m, 1e-3) < 1e-12);
  CHECK(phi(m, 0.0) == 0.0);
}

TEST_CASE("phi for the constructed distortion: closed branches and Monte Carlo") {
  auto m = baseline(-1.0);
  double kappa = m.t_plus.reversed_s_params()->kappa;
  for (double c : {0.5, 0.9, 1.0, 1.3}) CHECK(phi(m, c) == doctest::Approx(phi_closed(c, kappa)).epsilon(1e-8));
  double full = phi(m, Threshold::infinity());
  CHECK(full == doctest::Approx(phi_closed(kInf, kappa)).epsilon(1e-8));
  CHECK(full == doctest::Approx(15.353452).epsilon(1e-7));

  // Exponentially tilted Monte Carlo in score space: s ~ N(m, 1), weight phi(s)/phi(s - m).
  const double tilt = -2.3;
  std::mt19937_64 rng(42);
  std::normal_distribution<double> z;
  const int n = 10'000'000;
  double sum = 0.0;
  const double e = 1.0 / (1.0 - kAlpha);
  for (int i = 0; i < n; ++i) {
    double s = tilt + z(rng);
    double rho = std::exp(-0.07 + 0.2 * s);
    double w = std::exp(-tilt * s + 0.5 * tilt * tilt);
    double tprime = rho <= 1.0 ? kappa * std::pow(rho, -0.5) : kappa * std::pow(rho, 0.5);
    sum += std::pow(tprime / rho, e) * rho * w;
  }
  double mc = sum / n;
  CHECK(std::abs(mc - full) / full < 5e-4);
}

TEST_CASE("positive part: classical case, zero budget, and the two code paths") {
  BehavioralModel m(market(), SShapedUtility::two_piece_crra(0.5, kLoss), Distortion::identity(),
                    Distortion::power(0.4), 1.0);
  auto k = kernel();
  double inv = moment(-1.0, 0.0, kInf);
  auto pp = solve_positive_part(m, Threshold::infinity(), 2.0);
  for (double rho : {0.5, 0.93, 1.4}) {
    CHECK(pp.gain_profile(rho) == doctest::Approx(2.0 / (rho * rho * inv)).epsilon(1e-9));
  }
  CHECK(pp.v_plus == doctest::Approx(std::sqrt(2.0 * inv)).epsilon(1e-9));

  auto zero = solve_positive_part(m, 0.9, 0.0);
  CHECK(zero.v_plus == 0.0);

  auto crra = baseline(-1.0);
  BehavioralModel gen(market(), SShapedUtility::crra_as_generic(kAlpha, kLoss), crra.t_plus,
                      crra.t_minus, -1.0);
  for (double c : {0.7, 0.9035, 1.2}) {
    auto a = solve_positive_part(crra, c, 0.2);
    auto b = solve_positive_part(gen, c, 0.2);
    CHECK(b.lambda == doctest::Approx(a.lambda).epsilon(1e-8));
    CHECK(b.v_plus == doctest::Approx(a.v_plus).epsilon(1e-8));
    // CRRA closed form v+ = phi^{1-alpha} x+^alpha
    CHECK(a.v_plus == doctest::Approx(std::pow(phi(crra, c), 1.0 - kAlpha) * std::pow(0.2, kAlpha)).epsilon(1e-10));
  }
}

TEST_CASE("negative part: zero budget, identity trap, discrete threshold search") {
  auto m = baseline(-1.0);
  auto none = solve_negative_part(m, 0.9, -1.0);
  CHECK(none.v_minus == 0.0);
  CHECK(none.loss_level == 0.0);

  BehavioralModel trap(market(), SShapedUtility::two_piece_crra(kAlpha, kLoss), m.t_plus,
                       Distortion::identity(), -1.0);
  auto t = solve_negative_part(trap, 0.9, 0.5);
  CHECK_FALSE(t.attained);

  // exhaustive single-threshold search on 200 stratified states
  StateEconomy e = discretize(m.kernel, 200, Scheme::StratifiedTail);
  const double c = 0.9, x_plus = 0.2, budget = x_plus - m.x0;
  double best = kInf;
  std::size_t best_j = 0;
  double tail_price = 0.0, tail_prob = 0.0;
  for (std::size_t j = e.size(); j-- > 0;) {
    tail_price += e.states[j].rho * e.states[j].prob;
    tail_prob += e.states[j].prob;
    if (e.states[j].rho <= c) break;
    double v = kLoss * std::pow(budget / tail_price, kAlpha) * m.t_minus(tail_prob);
    if (v < best) best = v, best_j = j;
  }
  auto neg = solve_negative_part(m, c, x_plus);
  CHECK(neg.v_minus == doctest::Approx(best).epsilon(1e-2));
  double cb = neg.c_bar.as_double();
  double lo = e.states[best_j > 0 ? best_j - 1 : 0].rho;
  double hi = e.states[std::min(best_j + 1, e.size() - 1)].rho;
  CHECK(cb >= lo);
  CHECK(cb <= hi);
}

TEST_CASE("k(c) curve") {
  auto m = baseline(-1.0);
  for (double c : linspace(0.3, 3.0, 40)) CHECK(k_of_c(m, c) > 0.0);
  BehavioralModel m2(m.market, SShapedUtility::two_piece_crra(kAlpha, 2 * kLoss), m.t_plus,
                     m.t_minus, -1.0);
  for (double c : {0.6, 0.9, 1.5}) CHECK(k_of_c(m2, c) == doctest::Approx(2.0 * k_of_c(m, c)).epsilon(1e-12));

  // identity distortions: each factor by independent quadrature over the score
  BehavioralModel id(m.market, SShapedUtility::two_piece_crra(kAlpha, kLoss), Distortion::identity(),
                     Distortion::identity(), -1.0);
  auto k = m.kernel;
  for (double c : {0.7, 1.0, 1.4}) {
    double sc = k.score(c);
    auto dens = [](double s) { return std::exp(-0.5 * s * s) / std::sqrt(2 * M_PI); };
    double beta = -kAlpha / (1.0 - kAlpha);
    auto tilted = [](double b) {
      return [b](double s) { return std::exp(b * (-0.07 + 0.2 * s) - 0.5 * s * s) / std::sqrt(2 * M_PI); };
    };
    double ph = integrate(tilted(beta), -kInf, sc).value;
    double er = integrate(tilted(1.0), sc, kInf).value;
    double sf = integrate(dens, sc, kInf).value;
    double ref = kLoss * sf / (std::pow(ph, 1.0 - kAlpha) * std::pow(er, kAlpha));
    CHECK(k_of_c(id, c) == doctest::Approx(ref).epsilon(1e-8));
  }
}

TEST_CASE("classification") {
  auto c0 = classify_wellposedness(baseline(-1.0));
  CHECK(c0.tag == Tag::WellPosedAttained);
  REQUIRE(c0.inf_k.has_value());
  CHECK(*c0.inf_k == doctest::Approx(1.2422027).epsilon(1e-5));

  BehavioralModel trap(market(), SShapedUtility::two_piece_crra(kAlpha, kLoss),
                       baseline(1.0).t_plus, Distortion::identity(), 1.0);
  CHECK(classify_wellposedness(trap).tag == Tag::IllPosed);

  auto k = kernel();
  BehavioralModel literal(market(), SShapedUtility::two_piece_crra(kAlpha, kLoss),
                          build_reversed_s(k, 1.0, -0.5, 0.5), build_reversed_s(k, 1.0, -0.5, 0.5), 1.0);
  auto cl = classify_wellposedness(literal);
  CHECK(cl.tag == Tag::IllPosed);
  REQUIRE(cl.inf_k.has_value());
  CHECK(*cl.inf_k < 1.0);
  auto e = discretize(k, 50, Scheme::StratifiedTail);
  auto o = brute_force_master(e, {literal.utility, literal.t_plus, literal.t_minus}, 1.0);
  CHECK(o.tag == Tag::IllPosed);
}

TEST_CASE("zero endowment: stay out of the market") {
  auto r = solve_master(baseline(0.0));
  CHECK(r.tag == Tag::WellPosedAttained);
  CHECK(r.value == 0.0);
  REQUIRE(r.claim.has_value());
  for (double rho : {0.3, 0.9, 1.0, 2.5}) CHECK(r.claim->payoff(rho) == 0.0);
}

TEST_CASE("classical terminal wealth with identity T+") {
  BehavioralModel m(market(), SShapedUtility::two_piece_crra(0.5, kLoss), Distortion::identity(),
                    Distortion::power(0.4), 1.0);
  auto r = solve_master(m);
  REQUIRE(r.tag == Tag::WellPosedAttained);
  REQUIRE(r.claim.has_value());
  double inv = moment(-1.0, 0.0, kInf);
  for (double rho : {0.4, 0.8, 1.1, 2.0}) {
    CHECK(r.claim->payoff(rho) == doctest::Approx(1.0 / (rho * rho * inv)).epsilon(1e-6));
  }
  CHECK(r.claim->budget(m.kernel) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("negative endowment optimum matches a dense closed-form grid") {
  auto m = baseline(-1.0);
  auto r = solve_master(m);
  REQUIRE(r.tag == Tag::WellPosedAttained);
  REQUIRE(r.claim.has_value());
  CHECK(r.value == doctest::Approx(-1.6833251).epsilon(1e-6));
  CHECK(r.claim->c_star.as_double() == doctest::Approx(0.90352842).epsilon(1e-6));
  CHECK(r.claim->x_plus_star == doctest::Approx(0.196231).epsilon(1e-5));
  CHECK(r.claim->budget(m.kernel) == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(claim_value(m, *r.claim) == doctest::Approx(r.value).epsilon(1e-7));

  // 400 x 400 grid on (c, x+) with every factor in closed form
  double kappa = m.t_plus.reversed_s_params()->kappa;
  auto tm = Distortion::tversky_kahneman(0.69);
  const double c_lo = 0.5, c_hi = 1.5, x_hi = 0.5;
  const int n = 400;
  double best = -kInf, bc = 0, bx = 0;
  for (int i = 0; i < n; ++i) {
    double c = c_lo + (c_hi - c_lo) * i / (n - 1);
    double ph = phi_closed(c, kappa);
    double tail = moment(1.0, c, kInf);
    double wt = tm(0.5 * std::erfc(((std::log(c) + 0.07) / 0.2) / std::sqrt(2.0)));
    for (int j = 0; j < n; ++j) {
      double x = x_hi * j / (n - 1);
      double v = std::pow(ph, 1 - kAlpha) * std::pow(x, kAlpha) -
                 kLoss * std::pow((x - m.x0) / tail, kAlpha) * wt;
      if (v > best) best = v, bc = c, bx = x;
    }
  }
  CHECK(std::abs(r.claim->c_star.as_double() - bc) <= (c_hi - c_lo) / (n - 1));
  CHECK(std::abs(r.claim->x_plus_star - bx) <= x_hi / (n - 1));
  CHECK(r.value >= best - 1e-9);
}

TEST_CASE("positive endowment: gains-only claim") {
  auto m = baseline(1.0);
  auto r = solve_master(m);
  REQUIRE(r.tag == Tag::WellPosedAttained);
  CHECK(r.value == doctest::Approx(1.387857).epsilon(1e-6));
  CHECK(r.claim->c_star.is_infinite());
  CHECK(r.claim->budget(m.kernel) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("v+ increases in c and is concave in x+") {
  auto m = baseline(-1.0);
  double prev = -kInf;
  for (double c : linspace(0.4, 3.0, 30)) {
    double v = solve_positive_part(m, c, 0.3).v_plus;
    CHECK(v > prev);
    prev = v;
  }
  auto xs = linspace(0.05, 2.0, 30);
  std::vector<double> vs;
  for (double x : xs) vs.push_back(solve_positive_part(m, 0.9, x).v_plus);
  for (std::size_t i = 1; i + 1 < vs.size(); ++i) CHECK(vs[i - 1] + vs[i + 1] <= 2.0 * vs[i] + 1e-12);
}

TEST_CASE("audit of the baseline model passes") {
  auto r = audit_model(baseline(-1.0));
  CHECK(r.passed());
  BehavioralModel trap(market(), SShapedUtility::two_piece_crra(kAlpha, kLoss),
                       baseline(1.0).t_plus, Distortion::identity(), 1.0);
  auto t = audit_model(trap);
  CHECK_FALSE(t.passed("loss_distortion_trap"));
  trap.waived.push_back("loss_distortion_trap");
  CHECK(audit_model(trap).find("loss_distortion_trap")->status == CheckStatus::Waived);
}

TEST_CASE("general nested search reproduces the CRRA optimum" * doctest::timeout(120)) {
  auto crra = baseline(-1.0);
  BehavioralModel gen(market(), SShapedUtility::crra_as_generic(kAlpha, kLoss), crra.t_plus,
                      crra.t_minus, -1.0);
  auto r = solve_master_general(gen);
  REQUIRE(r.tag == Tag::WellPosedAttained);
  CHECK(r.value == doctest::Approx(-1.6833251).epsilon(1e-4));
  CHECK(r.claim->c_star.as_double() == doctest::Approx(0.90352842).epsilon(1e-3));
}
