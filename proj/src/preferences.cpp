#include "cpt/preferences.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cpt {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// ln Phi(s) without underflow in the far lower tail.
double log_normal_cdf(double s) {
  if (s > -30.0) return std::log(normal_cdf(s));
  // Mills-ratio expansion: Phi(s) ~ psi(s)/|s| (1 - 1/s^2 + 3/s^4).
  const double s2 = s * s;
  return normal_log_pdf(s) - std::log(-s) + std::log1p(-1.0 / s2 + 3.0 / (s2 * s2));
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

double tk_value(double delta, double p) {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  const double pd = std::pow(p, delta);
  return pd / std::pow(pd + std::pow(1.0 - p, delta), 1.0 / delta);
}

// T'(p) for Tversky-Kahneman, with the complement q = 1 - p passed separately
// so the upper tail keeps its precision.
double tk_derivative(double delta, double p, double q) {
  const double pd = std::pow(p, delta);
  const double qd = std::pow(q, delta);
  const double d = pd + qd;
  // Factored so that no intermediate overflows for denormal p or q.
  const double pm = std::pow(p, delta - 1.0);
  const double qm = std::pow(q, delta - 1.0);
  return (delta * pm - pd * (pm - qm) / d) / std::pow(d, 1.0 / delta);
}

void fill_monotone_slopes(TabulatedDistortion& tab) {
  const std::size_t n = tab.p.size();
  std::vector<double> secant(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    secant[i] = (tab.t[i + 1] - tab.t[i]) / (tab.p[i + 1] - tab.p[i]);
  }
  tab.slope.assign(n, 0.0);
  tab.slope[0] = secant[0];
  tab.slope[n - 1] = secant[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double l = secant[i - 1];
    const double r = secant[i];
    tab.slope[i] = (l * r > 0.0) ? 0.5 * (l + r) : 0.0;
  }
  // Fritsch-Carlson limiter keeps each cubic piece monotone.
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (secant[i] == 0.0) {
      tab.slope[i] = tab.slope[i + 1] = 0.0;
      continue;
    }
    const double a = tab.slope[i] / secant[i];
    const double b = tab.slope[i + 1] / secant[i];
    if (a < 0.0) tab.slope[i] = 0.0;
    if (b < 0.0) tab.slope[i + 1] = 0.0;
    const double h = a * a + b * b;
    if (h > 9.0) {
      const double tau = 3.0 / std::sqrt(h);
      tab.slope[i] = tau * a * secant[i];
      tab.slope[i + 1] = tau * b * secant[i];
    }
  }
}

std::pair<double, double> tabulated_eval(const TabulatedDistortion& tab, double p) {
  if (p <= 0.0) return {tab.t.front(), tab.slope.front()};
  if (p >= 1.0) return {tab.t.back(), tab.slope.back()};
  const auto it = std::upper_bound(tab.p.begin(), tab.p.end(), p);
  const std::size_t i = static_cast<std::size_t>(it - tab.p.begin()) - 1;
  const double h = tab.p[i + 1] - tab.p[i];
  const double u = (p - tab.p[i]) / h;
  const double u2 = u * u;
  const double u3 = u2 * u;
  const double h00 = 2 * u3 - 3 * u2 + 1;
  const double h10 = u3 - 2 * u2 + u;
  const double h01 = -2 * u3 + 3 * u2;
  const double h11 = u3 - u2;
  const double value = h00 * tab.t[i] + h10 * h * tab.slope[i] + h01 * tab.t[i + 1] +
                       h11 * h * tab.slope[i + 1];
  const double d00 = (6 * u2 - 6 * u) / h;
  const double d10 = 3 * u2 - 4 * u + 1;
  const double d01 = (-6 * u2 + 6 * u) / h;
  const double d11 = 3 * u2 - 2 * u;
  const double deriv =
      d00 * tab.t[i] + d10 * tab.slope[i] + d01 * tab.t[i + 1] + d11 * tab.slope[i + 1];
  return {value, deriv};
}

}  // namespace

// ---------------------------------------------------------------------------
// ValidationReport

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const CheckResult& c) { return c.status != CheckStatus::Fail; });
}

const CheckResult* ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

bool ValidationReport::passed(const std::string& name) const {
  const CheckResult* c = find(name);
  return c != nullptr && c->status != CheckStatus::Fail;
}

void ValidationReport::add(std::string name, bool ok, std::string witness) {
  checks.push_back({std::move(name), ok ? CheckStatus::Pass : CheckStatus::Fail,
                    std::move(witness)});
}

void ValidationReport::waive(const std::string& name) {
  for (auto& c : checks) {
    if (c.name == name) c.status = CheckStatus::Waived;
  }
}

std::string to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass:
      return "pass";
    case CheckStatus::Fail:
      return "FAIL";
    case CheckStatus::Waived:
      return "waived";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// SShapedUtility

SShapedUtility SShapedUtility::two_piece_crra(double alpha, double k_minus) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("CRRA utility: alpha must lie in (0, 1)");
  if (!(k_minus > 0.0)) throw DomainError("CRRA utility: k_minus must be positive");
  return SShapedUtility(TwoPieceCrra{alpha, k_minus});
}

SShapedUtility SShapedUtility::generic(GenericUtility u) {
  if (!u.gain || !u.loss || !u.gain_prime || !u.gain_prime_inverse || !u.gain_second) {
    throw DomainError("generic utility: all function handles are required");
  }
  return SShapedUtility(std::move(u));
}

SShapedUtility SShapedUtility::crra_as_generic(double alpha, double k_minus) {
  two_piece_crra(alpha, k_minus);  // parameter checks
  GenericUtility g;
  g.gain = [alpha](double x) { return std::pow(x, alpha); };
  g.loss = [alpha, k_minus](double x) { return k_minus * std::pow(x, alpha); };
  g.gain_prime = [alpha](double x) { return alpha * std::pow(x, alpha - 1.0); };
  g.gain_prime_inverse = [alpha](double y) { return std::pow(y / alpha, 1.0 / (alpha - 1.0)); };
  g.gain_second = [alpha](double x) { return alpha * (alpha - 1.0) * std::pow(x, alpha - 2.0); };
  return generic(std::move(g));
}

double SShapedUtility::gain(double x) const {
  return std::visit(overloaded{[x](const TwoPieceCrra& c) { return std::pow(x, c.alpha); },
                               [x](const GenericUtility& g) { return g.gain(x); }},
                    repr_);
}

double SShapedUtility::loss(double x) const {
  return std::visit(
      overloaded{[x](const TwoPieceCrra& c) { return c.k_minus * std::pow(x, c.alpha); },
                 [x](const GenericUtility& g) { return g.loss(x); }},
      repr_);
}

double SShapedUtility::gain_prime(double x) const {
  return std::visit(
      overloaded{[x](const TwoPieceCrra& c) { return c.alpha * std::pow(x, c.alpha - 1.0); },
                 [x](const GenericUtility& g) { return g.gain_prime(x); }},
      repr_);
}

double SShapedUtility::gain_prime_inverse(double y) const {
  return std::visit(overloaded{[y](const TwoPieceCrra& c) {
                                 return std::pow(y / c.alpha, 1.0 / (c.alpha - 1.0));
                               },
                               [y](const GenericUtility& g) { return g.gain_prime_inverse(y); }},
                    repr_);
}

double SShapedUtility::gain_second(double x) const {
  return std::visit(overloaded{[x](const TwoPieceCrra& c) {
                                 return c.alpha * (c.alpha - 1.0) * std::pow(x, c.alpha - 2.0);
                               },
                               [x](const GenericUtility& g) { return g.gain_second(x); }},
                    repr_);
}

double SShapedUtility::relative_risk_aversion(double x) const {
  if (const auto* c = crra()) return 1.0 - c->alpha;
  return -x * gain_second(x) / gain_prime(x);
}

bool SShapedUtility::gain_unbounded() const {
  return std::visit(overloaded{[](const TwoPieceCrra&) { return true; },
                               [](const GenericUtility& g) { return g.gain_unbounded; }},
                    repr_);
}

bool SShapedUtility::loss_strictly_concave_at_zero() const {
  if (is_crra()) return true;
  const double h = 1e-6;
  const double one = loss(h);
  const double two = loss(2 * h);
  return two < 2.0 * one * (1.0 - 1e-9);
}

// ---------------------------------------------------------------------------
// Distortions

double ReversedSDistortion::kappa_tilde() const { return kappa * std::pow(c0, a - b); }

double ReversedSDistortion::value_at_state(double x) const {
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double lx = std::log(x);
  if (x <= c0) {
    return kappa * std::exp(a * mu + 0.5 * a * a * sd * sd) *
           normal_cdf((lx - mu - a * sd * sd) / sd);
  }
  return 1.0 - kappa_tilde() * std::exp(b * mu + 0.5 * b * b * sd * sd) *
                   normal_sf((lx - mu - b * sd * sd) / sd);
}

double ReversedSDistortion::weight_at_state(double x) const {
  return x <= c0 ? kappa * std::pow(x, a) : kappa_tilde() * std::pow(x, b);
}

Distortion Distortion::identity() { return Distortion(IdentityDistortion{}); }

Distortion Distortion::power(double gamma) {
  if (!(gamma > 0.0)) throw DomainError("power distortion: exponent must be positive");
  return Distortion(PowerDistortion{gamma});
}

Distortion Distortion::tversky_kahneman(double delta) {
  // Below about 0.28 the weighting function stops being monotone.
  if (!(delta >= 0.28 && delta <= 1.0)) {
    throw DomainError("Tversky-Kahneman distortion: delta must lie in [0.28, 1]");
  }
  return Distortion(TverskyKahnemanDistortion{delta});
}

Distortion Distortion::truncated_power(double gamma, double knee) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw DomainError("truncated power distortion: gamma must lie in (0, 1)");
  }
  if (!(knee > 0.0 && knee < 1.0)) {
    throw DomainError("truncated power distortion: knee must lie in (0, 1)");
  }
  return Distortion(TruncatedPowerDistortion{gamma, knee});
}

Distortion Distortion::tabulated(std::vector<double> p, std::vector<double> t) {
  if (p.size() != t.size() || p.size() < 2) {
    throw DomainError("tabulated distortion: need at least two (p, T) pairs of equal length");
  }
  if (p.front() != 0.0 || p.back() != 1.0) {
    throw DomainError("tabulated distortion: grid must start at 0 and end at 1");
  }
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    if (!(p[i] < p[i + 1])) {
      throw DomainError("tabulated distortion: probability grid must be strictly increasing");
    }
  }
  TabulatedDistortion tab{std::move(p), std::move(t), {}};
  fill_monotone_slopes(tab);
  return Distortion(std::move(tab));
}

Distortion Distortion::reversed_s(const ReversedSDistortion& params) { return Distortion(params); }

Distortion::Kind Distortion::kind() const {
  return static_cast<Kind>(repr_.index());
}

std::string Distortion::name() const {
  return std::visit(
      overloaded{[](const IdentityDistortion&) { return std::string("identity"); },
                 [](const PowerDistortion& d) { return "power(gamma=" + fmt(d.gamma) + ")"; },
                 [](const TverskyKahnemanDistortion& d) {
                   return "tversky_kahneman(delta=" + fmt(d.delta) + ")";
                 },
                 [](const TruncatedPowerDistortion& d) {
                   return "truncated_power(gamma=" + fmt(d.gamma) + ", knee=" + fmt(d.knee) + ")";
                 },
                 [](const TabulatedDistortion& d) {
                   return "tabulated(" + std::to_string(d.p.size()) + " knots)";
                 },
                 [](const ReversedSDistortion& d) {
                   return "reversed_s(c0=" + fmt(d.c0) + ", a=" + fmt(d.a) + ", b=" + fmt(d.b) +
                          ")";
                 }},
      repr_);
}

double Distortion::operator()(double p) const {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  return std::visit(
      overloaded{[p](const IdentityDistortion&) { return p; },
                 [p](const PowerDistortion& d) { return std::pow(p, d.gamma); },
                 [p](const TverskyKahnemanDistortion& d) { return tk_value(d.delta, p); },
                 [p](const TruncatedPowerDistortion& d) {
                   const double top = std::pow(d.knee, d.gamma);
                   if (p <= d.knee) return std::pow(p, d.gamma);
                   return top + (1.0 - top) * (p - d.knee) / (1.0 - d.knee);
                 },
                 [p](const TabulatedDistortion& d) { return tabulated_eval(d, p).first; },
                 [p](const ReversedSDistortion& d) {
                   return d.value_at_state(std::exp(d.mu + d.sd * normal_quantile(p)));
                 }},
      repr_);
}

double Distortion::derivative(double p) const {
  return std::visit(
      overloaded{[](const IdentityDistortion&) { return 1.0; },
                 [p](const PowerDistortion& d) {
                   if (p <= 0.0) return d.gamma < 1.0 ? kInf : (d.gamma == 1.0 ? 1.0 : 0.0);
                   return d.gamma * std::pow(p, d.gamma - 1.0);
                 },
                 [p](const TverskyKahnemanDistortion& d) {
                   if (p <= 0.0 || p >= 1.0) return d.delta < 1.0 ? kInf : 1.0;
                   return tk_derivative(d.delta, p, 1.0 - p);
                 },
                 [p](const TruncatedPowerDistortion& d) {
                   if (p <= 0.0) return kInf;
                   if (p <= d.knee) return d.gamma * std::pow(p, d.gamma - 1.0);
                   return (1.0 - std::pow(d.knee, d.gamma)) / (1.0 - d.knee);
                 },
                 [p](const TabulatedDistortion& d) { return tabulated_eval(d, p).second; },
                 [p](const ReversedSDistortion& d) {
                   if (p <= 0.0 || p >= 1.0) return kInf;
                   return d.weight_at_state(std::exp(d.mu + d.sd * normal_quantile(p)));
                 }},
      repr_);
}

double Distortion::derivative_upper(double q) const {
  if (q <= 0.0 || q >= 1.0) return derivative(1.0 - q);
  if (const auto* d = std::get_if<TverskyKahnemanDistortion>(&repr_)) {
    return tk_derivative(d->delta, 1.0 - q, q);
  }
  if (const auto* r = reversed_s_params()) {
    return r->weight_at_state(std::exp(r->mu - r->sd * normal_quantile(q)));
  }
  return derivative(1.0 - q);
}

bool Distortion::built_on(const PricingKernel& k) const {
  const auto* r = reversed_s_params();
  return r != nullptr && r->mu == k.mu() && r->sd == k.sd();
}

double Distortion::log_state_weight(const PricingKernel& k, double s) const {
  constexpr double kTail = 30.0;
  if (const auto* r = reversed_s_params(); r != nullptr && built_on(k)) {
    const double lx = k.mu() + k.sd() * s;
    return lx <= std::log(r->c0) ? std::log(r->kappa) + r->a * lx
                                 : std::log(r->kappa_tilde()) + r->b * lx;
  }
  return std::visit(
      overloaded{[](const IdentityDistortion&) { return 0.0; },
                 [s](const PowerDistortion& d) {
                   return std::log(d.gamma) + (d.gamma - 1.0) * log_normal_cdf(s);
                 },
                 [s](const TverskyKahnemanDistortion& d) {
                   if (s < -kTail) return std::log(d.delta) + (d.delta - 1.0) * log_normal_cdf(s);
                   if (s > kTail) return (d.delta - 1.0) * log_normal_cdf(-s);
                   return std::log(tk_derivative(d.delta, normal_cdf(s), normal_cdf(-s)));
                 },
                 [s](const TruncatedPowerDistortion& d) {
                   const double lp = log_normal_cdf(s);
                   if (lp <= std::log(d.knee)) return std::log(d.gamma) + (d.gamma - 1.0) * lp;
                   return std::log((1.0 - std::pow(d.knee, d.gamma)) / (1.0 - d.knee));
                 },
                 [s](const TabulatedDistortion& d) {
                   return std::log(tabulated_eval(d, normal_cdf(s)).second);
                 },
                 [s](const ReversedSDistortion& d) {
                   // Built on a different kernel: go through probability space.
                   const double p = normal_cdf(s);
                   if (p <= 0.0 || p >= 1.0) return kInf;
                   return std::log(d.weight_at_state(std::exp(d.mu + d.sd * normal_quantile(p))));
                 }},
      repr_);
}

double Distortion::state_weight(const PricingKernel& k, double x) const {
  return std::exp(log_state_weight(k, k.score(x)));
}

std::vector<double> Distortion::probability_kinks() const {
  std::vector<double> out;
  if (const auto* r = reversed_s_params()) {
    out.push_back(normal_cdf((std::log(r->c0) - r->mu) / r->sd));
  } else if (const auto* t = std::get_if<TruncatedPowerDistortion>(&repr_)) {
    out.push_back(t->knee);
  } else if (const auto* tab = std::get_if<TabulatedDistortion>(&repr_)) {
    out.assign(tab->p.begin() + 1, tab->p.end() - 1);
  }
  return out;
}

std::vector<double> Distortion::state_kinks(const PricingKernel& k) const {
  std::vector<double> out;
  if (const auto* r = reversed_s_params()) {
    out.push_back(built_on(k) ? r->c0 : k.quantile(normal_cdf((std::log(r->c0) - r->mu) / r->sd)));
  } else if (const auto* t = std::get_if<TruncatedPowerDistortion>(&repr_)) {
    out.push_back(k.quantile(t->knee));
  } else if (const auto* tab = std::get_if<TabulatedDistortion>(&repr_)) {
    for (std::size_t i = 1; i + 1 < tab->p.size(); ++i) out.push_back(k.quantile(tab->p[i]));
  }
  return out;
}

Distortion build_reversed_s(const PricingKernel& k, double c0, double a, double b) {
  if (!(c0 > 0.0) || !std::isfinite(c0)) throw DomainError("reversed-S: c0 must be positive");
  if (!(a < 0.0)) throw DomainError("reversed-S: a must be negative");
  if (!(b > 0.0 && b < 1.0)) throw DomainError("reversed-S: b must lie in (0, 1)");
  ReversedSDistortion r;
  r.mu = k.mu();
  r.sd = k.sd();
  r.c0 = c0;
  r.a = a;
  r.b = b;
  const double s2 = k.sd() * k.sd();
  const double lc = std::log(c0);
  // 1/kappa = E[rho^a 1{rho <= c0}] + c0^{a-b} E[rho^b 1{rho > c0}].
  const double lower =
      std::exp(a * k.mu() + 0.5 * a * a * s2) * normal_cdf((lc - k.mu() - a * s2) / k.sd());
  const double upper = std::pow(c0, a - b) * std::exp(b * k.mu() + 0.5 * b * b * s2) *
                       normal_sf((lc - k.mu() - b * s2) / k.sd());
  r.kappa = 1.0 / (lower + upper);
  if (!(r.kappa > 0.0) || !std::isfinite(r.kappa)) {
    throw ModelError("reversed-S: normalisation constant is not positive");
  }
  return Distortion::reversed_s(r);
}

// ---------------------------------------------------------------------------
// Audits

ValidationReport validate_utility(const SShapedUtility& u, std::span<const double> grid) {
  if (grid.size() < 16) throw DomainError("validate_utility: grid needs at least 16 points");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0) || (i > 0 && !(grid[i] > grid[i - 1]))) {
      throw DomainError("validate_utility: grid must be positive and strictly increasing");
    }
  }
  ValidationReport rep;
  const double g0 = u.gain(0.0);
  const double l0 = u.loss(0.0);
  rep.add("gain_zero_at_origin", std::abs(g0) <= 1e-12, "u+(0) = " + fmt(g0));
  rep.add("loss_zero_at_origin", std::abs(l0) <= 1e-12, "u-(0) = " + fmt(l0));

  const auto audit_shape = [&](const char* label, auto&& fn, bool strict_concavity) {
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) v[i] = fn(grid[i]);
    std::optional<std::size_t> not_increasing;
    for (std::size_t i = 0; i + 1 < v.size() && !not_increasing; ++i) {
      if (!(v[i + 1] > v[i])) not_increasing = i;
    }
    rep.add(std::string(label) + "_increasing", !not_increasing,
            not_increasing ? "fails between x=" + fmt(grid[*not_increasing]) + " and x=" +
                                 fmt(grid[*not_increasing + 1])
                           : "");
    std::optional<std::size_t> not_concave;
    for (std::size_t i = 0; i + 2 < v.size() && !not_concave; ++i) {
      const double left = (v[i + 1] - v[i]) / (grid[i + 1] - grid[i]);
      const double right = (v[i + 2] - v[i + 1]) / (grid[i + 2] - grid[i + 1]);
      const double slack = 1e-12 * std::abs(left);
      const bool ok = strict_concavity ? right < left - slack : right <= left + slack;
      if (!ok) not_concave = i;
    }
    rep.add(std::string(label) + (strict_concavity ? "_strictly_concave" : "_concave"),
            !not_concave,
            not_concave ? "slope does not decrease around x=" + fmt(grid[*not_concave + 1]) : "");
  };
  audit_shape("gain", [&](double x) { return u.gain(x); }, true);
  audit_shape("loss", [&](double x) { return u.loss(x); }, false);

  constexpr double kElasticityFloor = 1e-3;
  const double r_lo = u.relative_risk_aversion(grid.front());
  const double r_hi = u.relative_risk_aversion(grid.back());
  rep.add("inada_at_zero", r_lo > kElasticityFloor,
          "R_u(" + fmt(grid.front()) + ") = " + fmt(r_lo) + ", u+'=" +
              fmt(u.gain_prime(grid.front())));
  rep.add("inada_at_infinity", r_hi > kElasticityFloor,
          "R_u(" + fmt(grid.back()) + ") = " + fmt(r_hi) + ", u+'=" +
              fmt(u.gain_prime(grid.back())));
  double liminf = kInf;
  for (std::size_t i = grid.size() - 4; i < grid.size(); ++i) {
    liminf = std::min(liminf, u.relative_risk_aversion(grid[i]));
  }
  rep.add("risk_aversion_liminf_positive", liminf > kElasticityFloor,
          "min R_u over largest grid points = " + fmt(liminf));
  return rep;
}

ValidationReport validate_distortion(const Distortion& t, std::span<const double> grid) {
  ValidationReport rep;
  const double t0 = t(0.0);
  const double t1 = t(1.0);
  rep.add("zero_at_zero", std::abs(t0) <= 1e-12, "T(0) = " + fmt(t0));
  rep.add("one_at_one", std::abs(t1 - 1.0) <= 1e-12, "T(1) = " + fmt(t1));

  std::vector<double> pts;
  pts.push_back(0.0);
  for (double p : grid) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("validate_distortion: grid must lie in (0, 1)");
    pts.push_back(p);
  }
  pts.push_back(1.0);
  std::sort(pts.begin(), pts.end());

  std::optional<std::size_t> violation;
  for (std::size_t i = 0; i + 1 < pts.size() && !violation; ++i) {
    if (!(t(pts[i + 1]) > t(pts[i]))) violation = i;
  }
  rep.add("strictly_increasing", !violation,
          violation ? "index " + std::to_string(*violation) + ": T(" + fmt(pts[*violation]) +
                          ") >= T(" + fmt(pts[*violation + 1]) + ")"
                    : "");

  std::optional<double> bad_slope;
  for (double p : grid) {
    const double d = t.derivative(p);
    if (!(d > 0.0) || !std::isfinite(d)) {
      bad_slope = p;
      break;
    }
  }
  rep.add("finite_positive_derivative", !bad_slope,
          bad_slope ? "T'(" + fmt(*bad_slope) + ") = " + fmt(t.derivative(*bad_slope))
                    : "T'(1e-6) = " + fmt(t.derivative(1e-6)) +
                          ", T'(1-1e-6) = " + fmt(t.derivative(1.0 - 1e-6)));
  return rep;
}

MonotonicityResult monotonicity_check(const PricingKernel& k, const Distortion& t_plus,
                                      std::size_t n) {
  if (n < 100) throw DomainError("monotonicity_check: grid needs at least 100 points");
  const std::vector<double> scores = linspace(-8.0, 8.0, n);
  MonotonicityResult out;
  double prev = -kInf;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = scores[i];
    const double log_ratio = k.mu() + k.sd() * s - t_plus.log_state_weight(k, s);
    if (i > 0 && log_ratio < prev - 1e-10) {
      out.holds = false;
      out.violation = {normal_cdf(scores[i - 1]), normal_cdf(s)};
      return out;
    }
    prev = log_ratio;
  }
  return out;
}

double j_function_numeric(const PricingKernel& k, const Distortion& t_plus, double x) {
  if (!(x > 0.0)) throw DomainError("j_function: x must be positive");
  const double h = x * 1e-4;
  const double up = t_plus.log_state_weight(k, k.score(x + h));
  const double down = t_plus.log_state_weight(k, k.score(x - h));
  const double j = x * (up - down) / (2.0 * h);
  if (!std::isfinite(j)) {
    throw EvaluationError("j_function: derivative blow-up at x = " + fmt(x), j);
  }
  return j;
}

double j_function(const PricingKernel& k, const Distortion& t_plus, double x) {
  if (!(x > 0.0)) throw DomainError("j_function: x must be positive");
  switch (t_plus.kind()) {
    case Distortion::Kind::Identity:
      return 0.0;
    case Distortion::Kind::ReversedS: {
      const auto* r = t_plus.reversed_s_params();
      if (r->mu == k.mu() && r->sd == k.sd()) return x <= r->c0 ? r->a : r->b;
      break;
    }
    case Distortion::Kind::Power: {
      const double gamma = *t_plus.power_exponent();
      const double s = k.score(x);
      return (gamma - 1.0) * std::exp(normal_log_pdf(s) - log_normal_cdf(s)) / k.sd();
    }
    default:
      break;
  }
  return j_function_numeric(k, t_plus, x);
}

}  // namespace cpt
