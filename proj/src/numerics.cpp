#include "cpt/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace cpt {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double polynomial(const double* c, int degree, double x) {
  double acc = c[degree];
  for (int i = degree - 1; i >= 0; --i) acc = acc * x + c[i];
  return acc;
}

// Wichura's AS241 (PPND16), relative accuracy about 1e-16.
double quantile_as241(double p) {
  static constexpr double a[] = {3.387132872796366608,  133.14166789178437745,
                                 1971.5909503065514427, 13731.693765509461125,
                                 45921.953931549871457, 67265.770927008700853,
                                 33430.575583588128105, 2509.0809287301226727};
  static constexpr double b[] = {1.0,                   42.313330701600911252,
                                 687.1870074920579083,  5394.1960214247511077,
                                 21213.794301586595867, 39307.89580009271061,
                                 28729.085735721942674, 5226.495278852545925};
  static constexpr double c[] = {1.42343711074968357734,  4.6303378461565452959,
                                 5.7694972214606914055,   3.64784832476320460504,
                                 1.27045825245236838258,  0.24178072517745061177,
                                 0.0227238449892691845833, 7.7454501427834140764e-4};
  static constexpr double d[] = {1.0,
                                 2.05319162663775882187,
                                 1.6763848301838038494,
                                 0.68976733498510000455,
                                 0.14810397642748007459,
                                 0.0151986665636164571966,
                                 5.475938084995344946e-4,
                                 1.05075007164441684324e-9};
  static constexpr double e[] = {6.6579046435011037772,    5.4637849111641143699,
                                 1.7848265399172913358,    0.29656057182850489123,
                                 0.026532189526576123093,  0.0012426609473880784386,
                                 2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static constexpr double f[] = {1.0,
                                 0.59983220655588793769,
                                 0.13692988092273580531,
                                 0.0148753612908506148525,
                                 7.868691311456132591e-4,
                                 1.8463183175100546818e-5,
                                 1.4215117583164458887e-7,
                                 2.04426310338993978564e-15};

  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * polynomial(a, 7, r) / polynomial(b, 7, r);
  }
  double r = q < 0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    x = polynomial(c, 7, r) / polynomial(d, 7, r);
  } else {
    r -= 5.0;
    x = polynomial(e, 7, r) / polynomial(f, 7, r);
  }
  return q < 0 ? -x : x;
}

}  // namespace

double normal_pdf(double x) { return std::exp(normal_log_pdf(x)); }

double normal_log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double normal_sf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

double normal_interval(double lo, double hi) {
  if (!(lo < hi)) return 0.0;
  if (lo > 0.0) return normal_sf(lo) - normal_sf(hi);
  return normal_cdf(hi) - normal_cdf(lo);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("normal_quantile: probability must lie in (0, 1)");
  }
  double x = quantile_as241(p);
  // One Halley step against the erfc-based cdf.
  for (int it = 0; it < 2; ++it) {
    const double err = x > 0.0 ? (1.0 - p) - normal_sf(x) : normal_cdf(x) - p;
    const double u = err / normal_pdf(x);
    if (!std::isfinite(u)) break;
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

namespace {

struct Panel {
  double a = 0.0;
  double b = 0.0;
  double value = 0.0;
  double error = 0.0;
  double l1 = 0.0;
};

// One 31-point Gauss-Kronrod panel. Boost returns the error of the rule on
// [-1, 1]; rescale it to the panel width.
Panel gk_panel(const std::function<double(double)>& g, double a, double b) {
  Panel p{a, b, 0.0, 0.0, 0.0};
  p.value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, a, b, 0, 0.0,
                                                                          &p.error, &p.l1);
  p.error *= 0.5 * (b - a);
  return p;
}

}  // namespace

Integral integrate(const std::function<double(double)>& f, double a, double b,
                   const QuadratureOptions& opts) {
  if (a == b) return {};
  if (a > b) {
    Integral r = integrate(f, b, a, opts);
    r.value = -r.value;
    return r;
  }
  // Map infinite ranges onto bounded ones.
  std::function<double(double)> g;
  double lo = a;
  double hi = b;
  if (std::isinf(a) && std::isinf(b)) {
    g = [&f](double t) {
      const double d = 1.0 - t * t;
      return f(t / d) * (1.0 + t * t) / (d * d);
    };
    lo = -1.0;
    hi = 1.0;
  } else if (std::isinf(b)) {
    g = [&f, a](double t) {
      const double d = 1.0 - t;
      return f(a + t / d) / (d * d);
    };
    lo = 0.0;
    hi = 1.0;
  } else if (std::isinf(a)) {
    g = [&f, b](double t) {
      const double d = 1.0 - t;
      return f(b - t / d) / (d * d);
    };
    lo = 0.0;
    hi = 1.0;
  } else {
    g = [&f](double x) { return f(x); };
  }

  // Global adaptive subdivision: always split the panel with the largest error.
  const auto worse = [](const Panel& x, const Panel& y) { return x.error < y.error; };
  std::vector<Panel> heap{gk_panel(g, lo, hi)};
  double value = heap.front().value;
  double error = heap.front().error;
  double l1 = heap.front().l1;
  const std::size_t max_panels = std::size_t{1} << std::min(opts.max_depth, 16u);
  while (heap.size() < max_panels) {
    const double target = std::max(opts.abs_tol, opts.rel_tol * l1);
    if (error <= target) break;
    std::pop_heap(heap.begin(), heap.end(), worse);
    const Panel worst = heap.back();
    heap.pop_back();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      heap.push_back(worst);
      std::push_heap(heap.begin(), heap.end(), worse);
      break;
    }
    const Panel left = gk_panel(g, worst.a, mid);
    const Panel right = gk_panel(g, mid, worst.b);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    l1 += left.l1 + right.l1 - worst.l1;
    heap.push_back(left);
    std::push_heap(heap.begin(), heap.end(), worse);
    heap.push_back(right);
    std::push_heap(heap.begin(), heap.end(), worse);
  }
  // Re-sum to shed the drift of the running updates.
  value = 0.0;
  error = 0.0;
  l1 = 0.0;
  for (const Panel& p : heap) {
    value += p.value;
    error += p.error;
    l1 += p.l1;
  }
  if (!std::isfinite(value)) {
    throw EvaluationError("integrate: non-finite integral", value);
  }
  const double target = std::max(opts.abs_tol, opts.rel_tol * l1);
  if (error > 1e4 * target && error > 1e-300) {
    throw EvaluationError("integrate: adaptive quadrature did not converge (error estimate " +
                              std::to_string(error) + ")",
                          error);
  }
  return {value, error};
}

Integral integrate_piecewise(const std::function<double(double)>& f, double a, double b,
                             std::span<const double> breakpoints,
                             const QuadratureOptions& opts) {
  Integral total;
  double left = a;
  for (double p : breakpoints) {
    if (p <= left || p >= b) continue;
    const Integral part = integrate(f, left, p, opts);
    total.value += part.value;
    total.error += part.error;
    left = p;
  }
  const Integral part = integrate(f, left, b, opts);
  total.value += part.value;
  total.error += part.error;
  return total;
}

ScoreIntegral integrate_score(const std::function<double(double)>& log_f, double lo,
                              double hi, std::span<const double> kinks,
                              const QuadratureOptions& opts) {
  constexpr double kReach = 80.0;
  constexpr double kStep = 0.25;
  constexpr double kDecay = 45.0;
  constexpr double kPanel = 2.0;

  ScoreIntegral out;
  if (!(lo < hi)) return out;

  const double scan_lo = std::max(lo, -kReach);
  const double scan_hi = std::min(hi, kReach);
  if (!(scan_lo < scan_hi)) {
    // Entire range lies beyond the reach: treat as negligible unless the
    // integrand is still large there.
    const double probe = log_f(std::isfinite(lo) ? lo : hi);
    out.converged = !(std::isfinite(probe) && probe > -kDecay);
    return out;
  }

  // Coarse scan for the peak and the effective support.
  const auto n = static_cast<std::size_t>(std::ceil((scan_hi - scan_lo) / kStep)) + 1;
  std::vector<double> grid = linspace(scan_lo, scan_hi, std::max<std::size_t>(n, 2));
  std::vector<double> logs(grid.size());
  double peak = -kInf;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    logs[i] = log_f(grid[i]);
    if (std::isnan(logs[i])) throw EvaluationError("integrate_score: NaN integrand", 0.0);
    peak = std::max(peak, logs[i]);
  }
  if (peak == -kInf) return out;

  std::size_t first = 0;
  while (logs[first] < peak - kDecay) ++first;
  std::size_t last = grid.size() - 1;
  while (logs[last] < peak - kDecay) --last;

  double eff_lo = first == 0 ? scan_lo : grid[first - 1];
  double eff_hi = last + 1 == grid.size() ? scan_hi : grid[last + 1];
  if (first == 0 && !std::isfinite(lo) ) out.converged = false;
  if (last + 1 == grid.size() && !std::isfinite(hi)) out.converged = false;
  // A finite end that was clipped by the reach counts as an infinite one.
  if (first == 0 && lo < -kReach) out.converged = false;
  if (last + 1 == grid.size() && hi > kReach) out.converged = false;

  std::vector<double> cuts;
  for (double k : kinks) {
    if (k > eff_lo && k < eff_hi) cuts.push_back(k);
  }
  for (double s = std::ceil(eff_lo / kPanel) * kPanel; s < eff_hi; s += kPanel) {
    if (s > eff_lo) cuts.push_back(s);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const auto f = [&](double s) {
    const double l = log_f(s);
    return l == -kInf ? 0.0 : std::exp(l);
  };
  // Panels far in the tails carry negligible mass; judge them against the
  // total rather than their own size.
  double rough = 0.0;
  for (std::size_t i = first; i <= last; ++i) rough += std::exp(logs[i]) * kStep;
  QuadratureOptions panel_opts = opts;
  panel_opts.abs_tol = std::max(opts.abs_tol, 1e-3 * opts.rel_tol * rough);
  const Integral r = integrate_piecewise(f, eff_lo, eff_hi, cuts, panel_opts);
  out.value = r.value;
  out.error = r.error;
  return out;
}

Minimum golden_section_min(const std::function<double(double)>& f, double lo, double hi,
                           double tol, int max_iter) {
  constexpr double kInvPhi = 0.6180339887498948482;
  double a = lo;
  double b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int it = 0; it < max_iter && (b - a) > tol; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  Minimum best = fc <= fd ? Minimum{c, fc} : Minimum{d, fd};
  // The bracket ends are legitimate candidates too.
  for (double x : {lo, hi}) {
    const double v = f(x);
    if (v < best.value) best = {x, v};
  }
  return best;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  out.back() = hi;
  return out;
}

std::size_t worker_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* cap = std::getenv("CPT_NUM_THREADS")) {
    const long v = std::strtol(cap, nullptr, 10);
    if (v >= 1) n = std::min(n, static_cast<std::size_t>(v));
  }
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace cpt
