#include "cpt/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cpt/choquet.hpp"

namespace cpt {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(8);
  os << v;
  return os.str();
}

// Gain side restricted to the m lowest-rho states, with anti-comonotone
// decision weights and pooled price/weight ratios.
class GainSide {
 public:
  GainSide(const StateEconomy& e, std::size_t m, const SShapedUtility& u, const Distortion& t)
      : u_(u), cost_(m), weight_(m), ratio_(m) {
    double cum = 0.0;
    double t_prev = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      cum += e.states[i].prob;
      const double t_next = t(std::min(cum, 1.0));
      cost_[i] = e.states[i].prob * e.states[i].rho;
      weight_[i] = t_next - t_prev;
      t_prev = t_next;
    }
    pool();
    if (const TwoPieceCrra* c = u.crra()) {
      crra_ = true;
      alpha_ = c->alpha;
      const double ex = 1.0 / (alpha_ - 1.0);
      for (std::size_t i = 0; i < m; ++i) {
        s1_ += cost_[i] * std::pow(ratio_[i], ex);
        s2_ += weight_[i] * std::pow(ratio_[i], ex * alpha_);
      }
    }
  }

  std::size_t size() const { return cost_.size(); }

  /// Value and multiplier for budget x_plus > 0 (m > 0).
  double value(double x_plus, double* lambda = nullptr) const {
    if (x_plus == 0.0) return 0.0;
    if (crra_) {
      const double k = x_plus / s1_;
      if (lambda != nullptr) *lambda = alpha_ * std::pow(k, alpha_ - 1.0);
      return s2_ * std::pow(k, alpha_);
    }
    const double l = solve_lambda(x_plus);
    if (lambda != nullptr) *lambda = l;
    double v = 0.0;
    for (std::size_t i = 0; i < size(); ++i) v += weight_[i] * u_.gain(u_.gain_prime_inverse(l * ratio_[i]));
    return v;
  }

  std::vector<double> profile(double x_plus) const {
    std::vector<double> x(size(), 0.0);
    if (x_plus == 0.0) return x;
    double lambda = 0.0;
    value(x_plus, &lambda);
    for (std::size_t i = 0; i < size(); ++i) x[i] = u_.gain_prime_inverse(lambda * ratio_[i]);
    return x;
  }

 private:
  // Pool adjacent violators so that cost/weight ratios are nondecreasing,
  // which makes the Lagrangian levels nonincreasing in rho.
  void pool() {
    struct Block {
      double cost;
      double weight;
      std::size_t begin;
      std::size_t end;
    };
    std::vector<Block> blocks;
    for (std::size_t i = 0; i < cost_.size(); ++i) {
      blocks.push_back({cost_[i], weight_[i], i, i + 1});
      while (blocks.size() > 1) {
        const Block& b = blocks.back();
        const Block& a = blocks[blocks.size() - 2];
        if (a.cost * b.weight <= b.cost * a.weight) break;
        const Block merged{a.cost + b.cost, a.weight + b.weight, a.begin, b.end};
        blocks.pop_back();
        blocks.back() = merged;
      }
    }
    for (const Block& b : blocks) {
      for (std::size_t i = b.begin; i < b.end; ++i) ratio_[i] = b.cost / b.weight;
    }
  }

  double budget(double lambda) const {
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += cost_[i] * u_.gain_prime_inverse(lambda * ratio_[i]);
    return s;
  }

  double solve_lambda(double x_plus) const {
    double lo = 0.0;
    double hi = 0.0;
    while (budget(std::exp(lo)) < x_plus) lo -= 2.0;
    hi = lo;
    while (budget(std::exp(hi)) > x_plus) hi += 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (budget(std::exp(mid)) > x_plus) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return std::exp(0.5 * (lo + hi));
  }

  const SShapedUtility& u_;
  std::vector<double> cost_;
  std::vector<double> weight_;
  std::vector<double> ratio_;
  bool crra_ = false;
  double alpha_ = 0.0;
  double s1_ = 0.0;
  double s2_ = 0.0;
};

// Loss side: single level over the cheapest threshold j >= m.
class LossSide {
 public:
  LossSide(const StateEconomy& e, const SShapedUtility& u, const Distortion& t) : u_(u), t_(t) {
    const std::size_t n = e.size();
    price_.assign(n + 1, 0.0);
    prob_.assign(n + 1, 0.0);
    for (std::size_t i = n; i-- > 0;) {
      price_[i] = price_[i + 1] + e.states[i].prob * e.states[i].rho;
      prob_[i] = prob_[i + 1] + e.states[i].prob;
    }
    if (const TwoPieceCrra* c = u.crra()) {
      crra_ = true;
      alpha_ = c->alpha;
      k_minus_ = c->k_minus;
      // Suffix minimum of T-(Q_j) / P_j^alpha.
      best_.assign(n + 1, kInf);
      arg_.assign(n + 1, n);
      for (std::size_t j = n; j-- > 0;) {
        const double v = t_(std::min(prob_[j], 1.0)) / std::pow(price_[j], alpha_);
        if (v <= best_[j + 1]) {
          best_[j] = v;
          arg_[j] = j;
        } else {
          best_[j] = best_[j + 1];
          arg_[j] = arg_[j + 1];
        }
      }
    }
  }

  /// Minimal loss value with loss budget L > 0 spread over states >= m.
  double value(std::size_t m, double loss_budget, std::size_t* threshold = nullptr) const {
    const std::size_t n = price_.size() - 1;
    if (loss_budget == 0.0) {
      if (threshold != nullptr) *threshold = n;
      return 0.0;
    }
    if (m >= n) return kInf;
    if (crra_) {
      if (threshold != nullptr) *threshold = arg_[m];
      return k_minus_ * std::pow(loss_budget, alpha_) * best_[m];
    }
    double best = kInf;
    std::size_t arg = n;
    for (std::size_t j = m; j < n; ++j) {
      const double v = u_.loss(loss_budget / price_[j]) * t_(std::min(prob_[j], 1.0));
      if (v < best) {
        best = v;
        arg = j;
      }
    }
    if (threshold != nullptr) *threshold = arg;
    return best;
  }

  double level(std::size_t j, double loss_budget) const { return loss_budget / price_[j]; }

 private:
  const SShapedUtility& u_;
  const Distortion& t_;
  std::vector<double> price_;
  std::vector<double> prob_;
  bool crra_ = false;
  double alpha_ = 0.0;
  double k_minus_ = 0.0;
  std::vector<double> best_;
  std::vector<std::size_t> arg_;
};

}  // namespace

// ---------------------------------------------------------------------------

void StateEconomy::validate() const {
  if (states.empty()) throw DomainError("state economy: no states");
  double total = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!(states[i].prob > 0.0)) throw DomainError("state economy: probabilities must be positive");
    if (!(states[i].rho > 0.0)) throw DomainError("state economy: rho must be positive");
    if (i > 0 && !(states[i].rho > states[i - 1].rho)) {
      throw DomainError("state economy: rho must be strictly increasing");
    }
    total += states[i].prob;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("state economy: probabilities must sum to 1");
}

double StateEconomy::price(std::span<const double> claim) const {
  if (claim.size() != states.size()) throw DomainError("state economy: claim size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) s += states[i].prob * states[i].rho * claim[i];
  return s;
}

double StateEconomy::mean_rho() const {
  double s = 0.0;
  for (const State& st : states) s += st.prob * st.rho;
  return s;
}

StateEconomy discretize(const PricingKernel& k, std::size_t n, Scheme scheme) {
  if (n < 2) throw DomainError("discretize: need at least 2 states");
  if (scheme == Scheme::StratifiedTail && n < 3) {
    throw DomainError("discretize: the stratified scheme needs at least 3 states");
  }
  std::vector<double> edges(n + 1);  // in normal score
  edges.front() = -kInf;
  edges.back() = kInf;
  if (scheme == Scheme::EqualProb) {
    for (std::size_t i = 1; i < n; ++i) {
      edges[i] = normal_quantile(static_cast<double>(i) / static_cast<double>(n));
    }
  } else {
    // Bands equally spaced in score out to +-5.5 (tail mass about 2e-8).
    constexpr double reach = 5.5;
    const std::vector<double> inner = linspace(-reach, reach, n - 1);
    for (std::size_t i = 1; i < n; ++i) edges[i] = inner[i - 1];
  }
  StateEconomy e;
  e.states.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = i == 0 ? 0.0 : k.level(edges[i]);
    const Threshold hi = i + 1 == n ? Threshold::infinity() : Threshold(k.level(edges[i + 1]));
    const double p = scheme == Scheme::EqualProb ? 1.0 / static_cast<double>(n)
                                                 : normal_interval(edges[i], edges[i + 1]);
    e.states[i] = {k.partial_power_moment(1.0, lo, hi) / p, p};
  }
  return e;
}

double discrete_cpt_value(const StateEconomy& e, std::span<const double> claim,
                          const SShapedUtility& u, const Distortion& t_plus,
                          const Distortion& t_minus) {
  if (claim.size() != e.size()) throw DomainError("discrete value: claim size mismatch");
  DiscreteClaim gains;
  DiscreteClaim losses;
  for (std::size_t i = 0; i < e.size(); ++i) {
    gains.outcomes.push_back({std::max(claim[i], 0.0), e.states[i].prob});
    losses.outcomes.push_back({std::max(-claim[i], 0.0), e.states[i].prob});
  }
  // Tiny rounding in the probabilities must not trip the claim validation.
  const auto renormalise = [](DiscreteClaim& c) {
    double s = 0.0;
    for (const auto& o : c.outcomes) s += o.prob;
    for (auto& o : c.outcomes) o.prob /= s;
  };
  renormalise(gains);
  renormalise(losses);
  const double vp = choquet_value_discrete(gains, [&u](double x) { return u.gain(x); }, t_plus);
  const double vm = choquet_value_discrete(losses, [&u](double x) { return u.loss(x); }, t_minus);
  return vp - vm;
}

OracleResult brute_force_master(const StateEconomy& e, const OraclePreferences& prefs, double x0,
                                const OracleConfig& cfg) {
  e.validate();
  if (e.size() > 400) throw DomainError("oracle: structured search is limited to n <= 400");
  const std::size_t n = e.size();
  const SShapedUtility& u = prefs.utility;
  const double x_lo = std::max(x0, 0.0);
  const double scale = 1.0 + std::abs(x0);

  std::vector<GainSide> gains;
  gains.reserve(n + 1);
  for (std::size_t m = 0; m <= n; ++m) gains.emplace_back(e, m, u, prefs.t_plus);
  const LossSide losses(e, u, prefs.t_minus);

  const auto cell_value = [&](std::size_t m, double x_plus) {
    if (m == 0 && x_plus > 0.0) return -kInf;
    const double loss_budget = x_plus - x0;
    const double vm = losses.value(m, loss_budget);
    if (!std::isfinite(vm)) return -kInf;
    return gains[m].value(x_plus) - vm;
  };

  // Offsets above x_lo, log-spaced up to the largest escalation bound.
  const double top = std::ldexp(scale, cfg.escalation_doublings);
  const double floor = cfg.x_grid_floor * scale;
  const auto decades = std::log10(top / floor);
  const std::size_t count =
      static_cast<std::size_t>(std::ceil(decades * static_cast<double>(cfg.x_grid_per_decade))) + 1;
  std::vector<double> offsets{0.0};
  for (double d : linspace(std::log10(floor), std::log10(top), count)) offsets.push_back(std::pow(10.0, d));
  // Make sure every escalation bound is itself a grid point.
  for (int kk = 0; kk <= cfg.escalation_doublings; ++kk) offsets.push_back(std::ldexp(scale, kk));
  std::sort(offsets.begin(), offsets.end());
  offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());

  std::vector<double> table((n + 1) * offsets.size(), -kInf);
  parallel_for(n + 1, [&](std::size_t m) {
    for (std::size_t j = 0; j < offsets.size(); ++j) {
      table[m * offsets.size() + j] = cell_value(m, x_lo + offsets[j]);
    }
  });

  OracleResult out;
  // Escalation: best value with the bound at 2^k (1 + |x0|). Ties go to the
  // lowest m, then the lowest x_plus.
  std::size_t best_m = 0;
  std::size_t best_j = 0;
  double best = -kInf;
  std::size_t j_done = 0;
  bool best_at_cap = false;
  for (int kk = 0; kk <= cfg.escalation_doublings; ++kk) {
    const double bound = std::ldexp(scale, kk);
    std::size_t j_end = j_done;
    while (j_end < offsets.size() && offsets[j_end] <= bound) ++j_end;
    for (std::size_t m = 0; m <= n; ++m) {
      for (std::size_t j = j_done; j < j_end; ++j) {
        const double v = table[m * offsets.size() + j];
        if (v > best || (v == best && (m < best_m || (m == best_m && j < best_j)))) {
          best = v;
          best_m = m;
          best_j = j;
        }
      }
    }
    j_done = j_end;
    out.escalation_values.push_back(best);
    best_at_cap = best_j + 1 == j_end;
  }

  bool growing = best_at_cap;
  for (std::size_t kk = 1; kk < out.escalation_values.size(); ++kk) {
    const double a = out.escalation_values[kk - 1];
    const double b = out.escalation_values[kk];
    if (!(b > a + 1e-9 * std::max(1.0, std::abs(a)))) growing = false;
  }
  if (growing) {
    out.tag = Tag::IllPosed;
    out.value = best;
    out.split = best_m;
    out.x_plus = x_lo + offsets[best_j];
    out.diagnostic = "value grows with every doubling of the x_plus bound (last: " + fmt(best) +
                     " at x_plus = " + fmt(out.x_plus) + ")";
    return out;
  }

  // Refine x_plus for the best split and its neighbours.
  double best_x = x_lo + offsets[best_j];
  for (std::size_t m = best_m == 0 ? 0 : best_m - 1; m <= std::min(best_m + 1, n); ++m) {
    std::size_t jb = 0;
    for (std::size_t j = 0; j < offsets.size(); ++j) {
      if (table[m * offsets.size() + j] > table[m * offsets.size() + jb]) jb = j;
    }
    if (jb == 0 || jb + 1 >= offsets.size()) continue;
    const double a = std::log(offsets[jb - 1] > 0.0 ? offsets[jb - 1] : floor * 1e-3);
    const double b = std::log(offsets[jb + 1]);
    const Minimum r = golden_section_min(
        [&](double t) { return -cell_value(m, x_lo + std::exp(t)); }, a, b, 1e-10);
    if (-r.value > best) {
      best = -r.value;
      best_m = m;
      best_x = x_lo + std::exp(r.x);
    }
  }

  // Assemble the claim.
  out.split = best_m;
  out.x_plus = best_x;
  out.claim.assign(n, 0.0);
  const std::vector<double> g = gains[best_m].profile(best_x);
  for (std::size_t i = 0; i < best_m; ++i) out.claim[i] = g[i];
  std::size_t threshold = n;
  const double loss_budget = best_x - x0;
  losses.value(best_m, loss_budget, &threshold);
  out.loss_threshold = threshold;
  if (loss_budget > 0.0) {
    const double level = losses.level(threshold, loss_budget);
    for (std::size_t i = threshold; i < n; ++i) out.claim[i] = -level;
  }
  out.value = discrete_cpt_value(e, out.claim, u, prefs.t_plus, prefs.t_minus);
  out.diagnostic = "split " + std::to_string(best_m) + ", loss threshold " +
                   std::to_string(threshold) + ", x_plus = " + fmt(best_x);

  if (cfg.local_search) {
    // Coordinate perturbations, budget restored on the two nearest states.
    std::vector<double> x = out.claim;
    double v = out.value;
    double span = 0.0;
    for (double xi : x) span = std::max(span, std::abs(xi));
    if (span == 0.0) span = scale;
    const auto cost = [&](std::size_t i) { return e.states[i].prob * e.states[i].rho; };
    for (std::size_t sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
      bool moved = false;
      for (double delta : {1e-1, 1e-2, 1e-3, 1e-4}) {
        for (std::size_t i = 0; i < n; ++i) {
          // Two nearest neighbours in rho order (one-sided at the ends).
          const std::size_t j1 = i == 0 ? 1 : i - 1;
          const std::size_t j2 = i == 0 ? 2 : (i + 1 < n ? i + 1 : i - 2);
          for (double sign : {1.0, -1.0}) {
            std::vector<double> y = x;
            const double step = sign * delta * span;
            y[i] += step;
            const double shift = step * cost(i) / 2.0;
            y[j1] -= shift / cost(j1);
            y[j2] -= shift / cost(j2);
            const double vy = discrete_cpt_value(e, y, u, prefs.t_plus, prefs.t_minus);
            if (vy > v + 1e-12 * std::max(1.0, std::abs(v))) {
              x = std::move(y);
              v = vy;
              moved = true;
            }
          }
        }
      }
      if (!moved) break;
    }
    out.local_improvement = (v - out.value) / std::max(std::abs(out.value), 1e-12);
    if (out.local_improvement > cfg.local_search_tol) {
      out.diagnostic += "; local search improved the structured optimum by " +
                        fmt(100.0 * out.local_improvement) + "%";
    }
  }
  return out;
}

ValidationReport verify_structure(const StateEconomy& e, std::span<const double> claim,
                                  double tol) {
  if (claim.size() != e.size()) throw DomainError("verify_structure: claim size mismatch");
  const std::size_t n = claim.size();
  double span = 0.0;
  for (double x : claim) span = std::max(span, std::abs(x));
  const double eps = tol * std::max(span, 1.0);
  ValidationReport rep;

  std::optional<std::size_t> bad;
  for (std::size_t i = 0; i + 1 < n && !bad; ++i) {
    if (std::max(claim[i + 1], 0.0) > std::max(claim[i], 0.0) + eps) bad = i;
  }
  rep.add("gains_nonincreasing_in_rho", !bad,
          bad ? "X(state " + std::to_string(*bad) + ") = " + fmt(claim[*bad]) + " < X(state " +
                    std::to_string(*bad + 1) + ") = " + fmt(claim[*bad + 1])
              : "");

  const bool has_gains = std::any_of(claim.begin(), claim.end(), [&](double x) { return x > eps; });
  std::optional<std::size_t> idle;
  if (has_gains) {
    for (std::size_t i = 0; i < n && !idle; ++i) {
      if (std::abs(claim[i]) <= eps) idle = i;
    }
  }
  rep.add("no_idle_states_with_gains", !idle,
          idle ? "state " + std::to_string(*idle) + " has zero wealth although gains are present"
               : "");

  std::optional<double> level;
  std::string loss_witness;
  bool single = true;
  bool upper = true;
  bool seen_loss = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (claim[i] < -eps) {
      seen_loss = true;
      if (!level) {
        level = claim[i];
      } else if (std::abs(claim[i] - *level) > 1e-9 * std::abs(*level) + eps) {
        single = false;
        loss_witness = "loss levels " + fmt(*level) + " and " + fmt(claim[i]);
      }
    } else if (seen_loss) {
      upper = false;
      loss_witness = "state " + std::to_string(i) + " above a loss state is not a loss";
    }
  }
  rep.add("single_loss_level_on_upper_set", single && upper, loss_witness);

  std::optional<std::size_t> hole;
  bool gain_region_over = false;
  for (std::size_t i = 0; i < n && !hole; ++i) {
    if (claim[i] > eps) {
      if (gain_region_over) hole = i;
    } else {
      gain_region_over = true;
    }
  }
  rep.add("gain_event_lower_set", !hole,
          hole ? "gain at state " + std::to_string(*hole) + " above a non-gain state" : "");
  return rep;
}

ArrangementCheck exhaustive_arrangement_check(const StateEconomy& e,
                                              std::span<const double> values) {
  e.validate();
  const std::size_t n = e.size();
  if (values.size() != n || n > 8) {
    throw DomainError("arrangement check: needs n <= 8 values matching the states");
  }
  for (const State& s : e.states) {
    if (std::abs(s.prob - e.states.front().prob) > 1e-12) {
      throw DomainError("arrangement check: states must be equally likely");
    }
  }
  std::vector<double> rho(n);
  for (std::size_t i = 0; i < n; ++i) rho[i] = e.states[i].rho;
  ArrangementCheck out;
  out.arrangement_price = e.price(anticomonotone_arrangement(values, rho));
  out.comonotone_price = e.price(comonotone_arrangement(values, rho));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  out.min_price = kInf;
  out.max_price = -kInf;
  std::vector<double> x(n);
  do {
    for (std::size_t i = 0; i < n; ++i) x[i] = values[perm[i]];
    const double p = e.price(x);
    out.min_price = std::min(out.min_price, p);
    out.max_price = std::max(out.max_price, p);
    ++out.permutations;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

}  // namespace cpt
