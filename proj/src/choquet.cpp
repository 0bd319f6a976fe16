#include "cpt/choquet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cpt {

void DiscreteClaim::validate() const {
  if (outcomes.empty()) throw DomainError("discrete claim: no outcomes");
  double total = 0.0;
  for (const auto& o : outcomes) {
    if (!(o.prob > 0.0)) throw DomainError("discrete claim: probabilities must be positive");
    if (!std::isfinite(o.value)) throw DomainError("discrete claim: values must be finite");
    if (o.value < 0.0) {
      throw DomainError("discrete claim: negative outcome (split gains and losses first)");
    }
    total += o.prob;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("discrete claim: probabilities must sum to 1");
}

// ---------------------------------------------------------------------------
// QuantileFn

namespace {

void check_knots(const std::vector<double>& knots, const std::vector<double>& values) {
  if (knots.empty() || knots.size() != values.size()) {
    throw DomainError("quantile function: knots and values must be non-empty and equal length");
  }
  if (knots.front() != 0.0) throw DomainError("quantile function: first knot must be 0");
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    if (!(knots[i] < knots[i + 1])) throw DomainError("quantile function: knots must increase");
    if (values[i] > values[i + 1]) throw DomainError("quantile function: values must not decrease");
  }
  if (values.front() < 0.0) throw DomainError("quantile function: values must be nonnegative");
}

}  // namespace

QuantileFn QuantileFn::step(std::vector<double> knots, std::vector<double> values) {
  check_knots(knots, values);
  if (knots.back() >= 1.0) throw DomainError("quantile function: step knots must lie below 1");
  QuantileFn g;
  g.kind_ = Kind::Step;
  g.kinks_.assign(knots.begin() + 1, knots.end());
  g.knots_ = std::move(knots);
  g.values_ = std::move(values);
  return g;
}

QuantileFn QuantileFn::linear(std::vector<double> knots, std::vector<double> values) {
  check_knots(knots, values);
  if (knots.size() < 2 || knots.back() != 1.0) {
    throw DomainError("quantile function: linear knots must end at 1");
  }
  QuantileFn g;
  g.kind_ = Kind::Linear;
  g.kinks_.assign(knots.begin() + 1, knots.end() - 1);
  g.knots_ = std::move(knots);
  g.values_ = std::move(values);
  return g;
}

QuantileFn QuantileFn::closed_form(std::function<double(double)> fn, std::vector<double> kinks) {
  if (!fn) throw DomainError("quantile function: empty handle");
  std::sort(kinks.begin(), kinks.end());
  QuantileFn g;
  g.kind_ = Kind::ClosedForm;
  g.fn_ = std::move(fn);
  g.kinks_ = std::move(kinks);
  return g;
}

QuantileFn QuantileFn::of_claim(const DiscreteClaim& x) {
  x.validate();
  std::vector<Outcome> sorted = x.outcomes;
  std::sort(sorted.begin(), sorted.end(),
            [](const Outcome& a, const Outcome& b) { return a.value < b.value; });
  std::vector<double> knots{0.0};
  std::vector<double> values{sorted.front().value};
  double cum = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    cum += sorted[i].prob;
    if (i + 1 < sorted.size() && sorted[i + 1].value > values.back()) {
      knots.push_back(cum);
      values.push_back(sorted[i + 1].value);
    }
  }
  return step(std::move(knots), std::move(values));
}

double QuantileFn::operator()(double z) const {
  switch (kind_) {
    case Kind::ClosedForm:
      return fn_(z);
    case Kind::Step: {
      if (z <= 0.0) return values_.front();
      // Left-continuous: the piece (knots[i], knots[i+1]] owns its right end.
      const auto it = std::lower_bound(knots_.begin(), knots_.end(), z);
      return values_[static_cast<std::size_t>(it - knots_.begin()) - 1];
    }
    case Kind::Linear: {
      if (z <= 0.0) return values_.front();
      if (z >= 1.0) return values_.back();
      const auto it = std::upper_bound(knots_.begin(), knots_.end(), z);
      const std::size_t i = static_cast<std::size_t>(it - knots_.begin()) - 1;
      const double w = (z - knots_[i]) / (knots_[i + 1] - knots_[i]);
      return values_[i] + w * (values_[i + 1] - values_[i]);
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Choquet values

double choquet_value_discrete(const DiscreteClaim& x, const UtilityFn& u, const Distortion& t) {
  x.validate();
  std::vector<Outcome> sorted = x.outcomes;
  std::sort(sorted.begin(), sorted.end(),
            [](const Outcome& a, const Outcome& b) { return a.value < b.value; });
  // Merge equal values; tail probabilities accumulate from the top.
  std::vector<double> levels;
  std::vector<double> probs;
  for (const auto& o : sorted) {
    if (!levels.empty() && levels.back() == o.value) {
      probs.back() += o.prob;
    } else {
      levels.push_back(o.value);
      probs.push_back(o.prob);
    }
  }
  std::vector<double> tail(levels.size());
  double acc = 0.0;
  for (std::size_t i = levels.size(); i-- > 0;) {
    acc += probs[i];
    tail[i] = std::min(acc, 1.0);
  }
  tail.front() = 1.0;
  double value = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const double ui = u(levels[i]);
    value += (ui - prev) * t(tail[i]);
    prev = ui;
  }
  return value;
}

double choquet_value_quantile(const QuantileFn& g, const UtilityFn& u, const Distortion& t,
                              const ChoquetQuadrature& cfg) {
  std::vector<double> cuts{0.0, 0.5, 1.0};
  for (double z : g.breakpoints()) {
    if (z > 0.0 && z < 1.0) cuts.push_back(z);
  }
  for (double pk : t.probability_kinks()) {
    if (pk > 0.0 && pk < 1.0) cuts.push_back(1.0 - pk);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  QuadratureOptions opts;
  opts.abs_tol = cfg.abs_tol;
  opts.rel_tol = cfg.rel_tol;
  const double p = cfg.endpoint_power;
  // Geometric cuts toward w = 0, where slowly varying singularities of T'
  // fool the local error estimate.
  std::vector<double> w_cuts;
  for (double w = 1e-1; w >= 1e-12; w *= 1e-1) w_cuts.insert(w_cuts.begin(), w);

  double total = 0.0;
  const std::size_t panels = cuts.size() - 1;
  for (std::size_t i = 0; i < panels; ++i) {
    const double lo = cuts[i];
    const double hi = cuts[i + 1];
    // Interior value of g on a step panel, so the integrand never straddles a jump.
    const bool step = g.kind() == QuantileFn::Kind::Step;
    const double step_level = step ? u(g(0.5 * (lo + hi))) : 0.0;
    const auto ug = [&](double z) { return step ? step_level : u(g(z)); };
    Integral part;
    if (i == 0) {
      // z = lo + (hi - lo) w^p: T'(1 - z) may blow up as z -> 0.
      part = integrate_piecewise(
          [&](double w) {
            const double z = (hi - lo) * std::pow(w, p);
            const double jac = (hi - lo) * p * std::pow(w, p - 1.0);
            return jac == 0.0 ? 0.0 : ug(z) * t.derivative_upper(z) * jac;
          },
          0.0, 1.0, w_cuts, opts);
    } else if (i + 1 == panels) {
      // 1 - z = (hi - lo) w^p keeps the complement exact near z = 1.
      part = integrate_piecewise(
          [&](double w) {
            const double q = (hi - lo) * std::pow(w, p);
            const double jac = (hi - lo) * p * std::pow(w, p - 1.0);
            return jac == 0.0 ? 0.0 : ug(1.0 - q) * t.derivative(q) * jac;
          },
          0.0, 1.0, w_cuts, opts);
    } else {
      part = integrate([&](double z) { return ug(z) * t.derivative(1.0 - z); }, lo, hi, opts);
    }
    total += part.value;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Arrangements

namespace {

ArrangedClaim arrange(const QuantileFn& g, const PricingKernel& k, bool with_rho) {
  ArrangedClaim out;
  out.payoff = [g, k, with_rho](double rho) {
    const double s = k.score(rho);
    return g(with_rho ? normal_cdf(s) : normal_sf(s));
  };
  std::vector<double> kinks;
  for (double z : g.breakpoints()) {
    if (z > 0.0 && z < 1.0) kinks.push_back(with_rho ? normal_quantile(z) : -normal_quantile(z));
  }
  std::sort(kinks.begin(), kinks.end());
  const double mu = k.mu();
  const double sd = k.sd();
  const auto log_f = [&](double s) {
    const double x = g(with_rho ? normal_cdf(s) : normal_sf(s));
    if (!(x > 0.0)) return -kInf;
    return std::log(x) + mu + sd * s + normal_log_pdf(s);
  };
  const ScoreIntegral r = integrate_score(log_f, -kInf, kInf, kinks);
  out.price = r.value;
  out.finite = r.converged && std::isfinite(r.value);
  if (!out.finite) out.price = kInf;
  return out;
}

std::vector<double> arrange_states(std::span<const double> values, std::span<const double> rho,
                                   bool with_rho) {
  if (values.size() != rho.size()) throw DomainError("arrangement: size mismatch");
  std::vector<std::size_t> order(rho.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rho[a] < rho[b]; });
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  if (!with_rho) std::reverse(sorted.begin(), sorted.end());
  std::vector<double> out(values.size());
  for (std::size_t r = 0; r < order.size(); ++r) out[order[r]] = sorted[r];
  return out;
}

}  // namespace

ArrangedClaim comonotone_max(const QuantileFn& g, const PricingKernel& k) {
  return arrange(g, k, true);
}

ArrangedClaim anticomonotone_min(const QuantileFn& g, const PricingKernel& k) {
  return arrange(g, k, false);
}

std::vector<double> comonotone_arrangement(std::span<const double> values,
                                           std::span<const double> rho) {
  return arrange_states(values, rho, true);
}

std::vector<double> anticomonotone_arrangement(std::span<const double> values,
                                               std::span<const double> rho) {
  return arrange_states(values, rho, false);
}

// ---------------------------------------------------------------------------
// Step functions and the rearrangement gap

void StepFunction::validate() const {
  if (levels.size() != jumps.size() + 1) throw DomainError("step function: need one more level than jumps");
  for (std::size_t i = 0; i < jumps.size(); ++i) {
    if (!(jumps[i] > (i == 0 ? 0.0 : jumps[i - 1]))) {
      throw DomainError("step function: jumps must be positive and increasing");
    }
  }
  if (levels.front() < 0.0) throw DomainError("step function: levels must be nonnegative");
  for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
    if (levels[i] > levels[i + 1]) throw DomainError("step function: levels must not decrease");
  }
}

double StepFunction::left_limit(double y) const {
  if (y <= 0.0) return 0.0;
  // Number of jumps strictly below y decides the piece just left of y.
  const auto n = std::lower_bound(jumps.begin(), jumps.end(), y) - jumps.begin();
  return levels[static_cast<std::size_t>(n)];
}

double StepFunction::right_limit(double y) const {
  const auto n = std::upper_bound(jumps.begin(), jumps.end(), y) - jumps.begin();
  return levels[static_cast<std::size_t>(n)];
}

double StepFunction::integral(double y) const {
  double total = 0.0;
  double left = 0.0;
  for (std::size_t i = 0; i < levels.size() && left < y; ++i) {
    const double right = i < jumps.size() ? std::min(jumps[i], y) : y;
    total += levels[i] * (right - left);
    left = right;
  }
  return total;
}

double StepFunction::inverse_integral(double x) const {
  if (x > levels.back()) return kInf;
  // On (levels[i-1], levels[i]] the inverse equals the start of piece i.
  double total = 0.0;
  double below = 0.0;
  for (std::size_t i = 0; i < levels.size() && below < x; ++i) {
    const double top = std::min(levels[i], x);
    if (top > below) {
      const double start = i == 0 ? 0.0 : jumps[i - 1];
      total += start * (top - below);
      below = top;
    }
  }
  return total;
}

double rearrangement_gap(const StepFunction& f, double x, double y) {
  f.validate();
  if (x < 0.0 || y < 0.0) throw DomainError("rearrangement gap: x and y must be nonnegative");
  return f.inverse_integral(x) + f.integral(y) - x * y;
}

bool rearrangement_equality_condition(const StepFunction& f, double x, double y) {
  return f.left_limit(y) <= x && x <= f.right_limit(y);
}

}  // namespace cpt
