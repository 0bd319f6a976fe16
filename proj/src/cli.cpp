#include "cpt/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cpt/oracle.hpp"
#include "cpt/replication.hpp"

namespace cpt::cli {
namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Schema helpers

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(path.empty() ? key : path + "." + key, "missing field");
  return *it;
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(path, "must be finite");
  return x;
}

double number_in(const json& obj, const std::string& key, const std::string& path, double lo,
                 double hi, bool open_lo = false, bool open_hi = false) {
  std::string p = join(path, key);
  double x = number(require(obj, key, path), p);
  bool bad = open_lo ? x <= lo : x < lo;
  bad = bad || (open_hi ? x >= hi : x > hi);
  if (bad) {
    std::ostringstream os;
    os << "value " << x << " outside " << (open_lo ? "(" : "[") << lo << ", " << hi
       << (open_hi ? ")" : "]");
    throw ConfigError(p, os.str());
  }
  return x;
}

std::vector<double> number_list(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

std::string text(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

MarketParams parse_market(const json& j) {
  const std::string path = "market";
  MarketParams m;
  m.rate = number(require(j, "rate", path), "market.rate");
  m.horizon = number_in(j, "horizon", path, 0.0, 1e3, true);
  std::vector<double> b;
  const json& bj = require(j, "excess_return", path);
  if (bj.is_number()) b = {number(bj, "market.excess_return")};
  else b = number_list(bj, "market.excess_return");
  if (b.empty()) throw ConfigError("market.excess_return", "needs at least one asset");
  const std::size_t n = b.size();
  m.excess_return = Eigen::Map<Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(n));
  const json& sj = require(j, "volatility", path);
  m.volatility.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  if (sj.is_number()) {
    if (n != 1) throw ConfigError("market.volatility", "scalar volatility needs one asset");
    m.volatility(0, 0) = number(sj, "market.volatility");
  } else {
    if (!sj.is_array() || sj.size() != n)
      throw ConfigError("market.volatility", "expected an n x n array");
    for (std::size_t i = 0; i < n; ++i) {
      std::string rp = "market.volatility[" + std::to_string(i) + "]";
      auto row = number_list(sj[i], rp);
      if (row.size() != n) throw ConfigError(rp, "row length differs from asset count");
      for (std::size_t c = 0; c < n; ++c)
        m.volatility(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c];
    }
  }
  try {
    m.validate();
  } catch (const Error& e) {
    throw ConfigError("market", e.what());
  }
  return m;
}

SShapedUtility parse_utility(const json& j) {
  const std::string path = "utility";
  std::string type = text(require(j, "type", path), "utility.type");
  if (type != "crra" && type != "crra_generic")
    throw ConfigError("utility.type", "unknown utility '" + type + "'");
  double alpha = number_in(j, "alpha", path, 0.0, 1.0, true, true);
  double k_minus = number_in(j, "k_minus", path, 0.0, 1e6, true);
  return type == "crra" ? SShapedUtility::two_piece_crra(alpha, k_minus)
                        : SShapedUtility::crra_as_generic(alpha, k_minus);
}

Distortion parse_distortion(const json& j, const std::string& path, const PricingKernel& k) {
  std::string type = text(require(j, "type", path), join(path, "type"));
  try {
    if (type == "identity") return Distortion::identity();
    if (type == "power") return Distortion::power(number_in(j, "gamma", path, 0.0, 1.0, true));
    if (type == "tversky_kahneman")
      return Distortion::tversky_kahneman(number_in(j, "delta", path, 0.28, 1.0));
    if (type == "truncated_power")
      return Distortion::truncated_power(number_in(j, "gamma", path, 0.0, 1.0, true),
                                         number_in(j, "knee", path, 0.0, 1.0, true, true));
    if (type == "tabulated")
      return Distortion::tabulated(number_list(require(j, "p", path), join(path, "p")),
                                   number_list(require(j, "t", path), join(path, "t")));
    if (type == "reversed_s") {
      double c0 = number_in(j, "c0", path, 0.0, 1e12, true);
      double a = number_in(j, "a", path, -1e3, 0.0, false, true);
      double b = number_in(j, "b", path, 0.0, 1.0, true, true);
      return build_reversed_s(k, c0, a, b);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
  throw ConfigError(join(path, "type"), "unknown distortion '" + type + "'");
}

std::size_t count_in(const json& obj, const std::string& key, const std::string& path,
                     std::size_t lo, std::size_t hi) {
  std::string p = join(path, key);
  const json& v = require(obj, key, path);
  if (!v.is_number_integer()) throw ConfigError(p, "expected an integer");
  auto x = v.get<long long>();
  if (x < static_cast<long long>(lo) || x > static_cast<long long>(hi))
    throw ConfigError(p, "value " + std::to_string(x) + " outside [" + std::to_string(lo) +
                             ", " + std::to_string(hi) + "]");
  return static_cast<std::size_t>(x);
}

// ---------------------------------------------------------------------------
// Output helpers

class Csv {
 public:
  Csv(std::ostream& os, const std::string& command, const std::vector<std::string>& columns)
      : os_(os) {
    os_ << "# cpt " << command << " v1 columns:";
    for (const auto& c : columns) os_ << ' ' << c;
    os_ << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
    os_ << '\n';
    os_ << std::setprecision(12);
  }
  Csv& cell(double x) {
    sep();
    os_ << x;
    return *this;
  }
  Csv& cell(const std::string& s) {
    sep();
    os_ << s;
    return *this;
  }
  void end() {
    os_ << '\n';
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) os_ << ',';
    first_ = false;
  }
  std::ostream& os_;
  bool first_ = true;
};

struct Outputs {
  std::optional<std::filesystem::path> dir;

  // Opens <dir>/<name>, or returns nullptr when no directory was given.
  std::unique_ptr<std::ofstream> open(const std::string& name) const {
    if (!dir) return nullptr;
    auto f = std::make_unique<std::ofstream>(*dir / name, std::ios::binary);
    if (!*f) throw ConfigError("--out", "cannot write " + (*dir / name).string());
    return f;
  }
};

// Writes a report to stdout and, when an output directory is set, to a file.
void emit_report(const Outputs& o, const std::string& name, const std::string& body,
                 std::ostream& out) {
  out << body;
  if (auto f = o.open(name)) *f << body;
}

std::string g12(double x) {
  std::ostringstream os;
  os << std::setprecision(12) << x;
  return os.str();
}

std::string audit_table(const ValidationReport& r) {
  std::ostringstream os;
  std::size_t width = 5;
  for (const auto& c : r.checks) width = std::max(width, c.name.size());
  os << std::left << std::setw(static_cast<int>(width) + 2) << "check" << std::setw(8) << "status"
     << "witness\n";
  for (const auto& c : r.checks)
    os << std::setw(static_cast<int>(width) + 2) << c.name << std::setw(8) << to_string(c.status)
       << c.witness << '\n';
  return os.str();
}

// Checks on the primitives themselves; classification handles the rest.
bool primitives_pass(const ValidationReport& r) {
  for (const auto& c : r.checks) {
    bool primitive = c.name.rfind("utility.", 0) == 0 || c.name.rfind("t_plus.", 0) == 0 ||
                     c.name.rfind("t_minus.", 0) == 0;
    if (primitive && c.status == CheckStatus::Fail) return false;
  }
  return true;
}

// rho grid at evenly spaced normal scores of the kernel law.
std::vector<double> rho_grid(const PricingKernel& k, std::size_t n) {
  std::vector<double> out;
  const double lo = -4.0, hi = 4.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = n == 1 ? 0.0 : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    out.push_back(k.level(s));
  }
  return out;
}

std::string summary_of(const Classification& c) {
  std::ostringstream os;
  os << std::setprecision(12);
  os << "tag: " << to_string(c.tag) << '\n';
  os << "value: " << c.value << '\n';
  if (c.inf_k) os << "inf_k: " << *c.inf_k << " at c = " << c.c_at_inf_k << '\n';
  if (!c.diagnostic.empty()) os << "diagnostic: " << c.diagnostic << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Commands

struct Context {
  const RunConfig& cfg;
  const BehavioralModel& model;
  Outputs outputs;
  bool force = false;
  std::uint64_t seed = 0;
  std::optional<std::size_t> grid;
  std::ostream& out;
  std::ostream& err;
};

int cmd_audit(const Context& ctx) {
  ValidationReport r = audit_model(ctx.model);
  std::ostringstream os;
  os << "# assumption audit\n" << audit_table(r);
  if (const auto* trap = r.find("loss_distortion_trap"); trap && trap->status == CheckStatus::Fail)
    os << "warning: the loss distortion does not overweight extreme losses; any x0 is ill-posed\n";
  os << "overall: " << (r.passed() ? "pass" : "fail") << '\n';
  emit_report(ctx.outputs, "audit.txt", os.str(), ctx.out);
  return kOk;
}

int cmd_classify(const Context& ctx) {
  ValidationReport r = audit_model(ctx.model);
  if (!primitives_pass(r) && !ctx.force) {
    ctx.err << "audit failed (use --force to classify anyway):\n" << audit_table(r);
    return kRegimeMismatch;
  }
  Classification c = classify_wellposedness(ctx.model, ctx.cfg.solver);
  emit_report(ctx.outputs, "classify.txt", summary_of(c), ctx.out);
  if (auto f = ctx.outputs.open("k_curve.csv")) {
    Csv csv(*f, "classify", {"c", "k", "G"});
    for (const auto& p : c.curve) {
      csv.cell(p.c).cell(p.k).cell(p.g);
      csv.end();
    }
  }
  if (c.tag == Tag::Borderline) {
    ctx.err << "borderline: inf k is within the band of 1; " << c.diagnostic << '\n';
    return kBorderline;
  }
  return kOk;
}

int cmd_solve(const Context& ctx) {
  ValidationReport r = audit_model(ctx.model);
  if (!primitives_pass(r) && !ctx.force) {
    ctx.err << "audit failed (use --force to solve anyway):\n" << audit_table(r);
    return kRegimeMismatch;
  }
  Classification c = solve_master(ctx.model, ctx.cfg.solver);
  if (c.tag != Tag::WellPosedAttained || !c.claim) {
    std::ostringstream os;
    os << "no optimal claim: regime is " << to_string(c.tag) << '\n'
       << "supremum: " << g12(c.value) << '\n';
    if (!c.diagnostic.empty()) os << "diagnostic: " << c.diagnostic << '\n';
    emit_report(ctx.outputs, "summary.txt", os.str(), ctx.out);
    if (c.tag == Tag::Borderline) return kBorderline;
    if (c.tag == Tag::IllPosed) return kIllPosed;
    return kRegimeMismatch;
  }
  const TerminalClaim& x = *c.claim;
  double budget = x.budget(ctx.model.kernel);
  std::ostringstream os;
  os << std::setprecision(12);
  os << "tag: " << to_string(c.tag) << '\n';
  os << "c_star: " << x.c_star.as_double() << '\n';
  os << "x_plus_star: " << x.x_plus_star << '\n';
  if (x.lambda_star) os << "lambda_star: " << *x.lambda_star << '\n';
  else os << "lambda_star: none\n";
  os << "loss_level: " << x.loss_level << '\n';
  os << "value: " << c.value << '\n';
  os << "budget_residual: " << budget - ctx.model.x0 << '\n';
  emit_report(ctx.outputs, "summary.txt", os.str(), ctx.out);
  if (auto f = ctx.outputs.open("claim.csv")) {
    Csv csv(*f, "solve", {"rho", "X"});
    for (double rho : rho_grid(ctx.model.kernel, ctx.grid.value_or(ctx.cfg.rho_points))) {
      csv.cell(rho).cell(x.payoff(rho));
      csv.end();
    }
  }
  return kOk;
}

int cmd_path(const Context& ctx) {
  OptimalPathParams params;
  try {
    params = optimal_path_params(ctx.model);
  } catch (const Error& e) {
    ctx.err << "regime mismatch: " << e.what() << '\n';
    return kRegimeMismatch;
  }
  const MarketParams& mk = ctx.model.market;
  const Eigen::Index n = mk.excess_return.size();
  Eigen::VectorXd merton = merton_ratio(mk, params.alpha);
  std::vector<std::string> cols = {"t", "rho_t", "x"};
  for (Eigen::Index i = 0; i < n; ++i) cols.push_back("pi_" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < n; ++i) cols.push_back("ratio_" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < n; ++i) cols.push_back("merton_" + std::to_string(i + 1));
  cols.push_back("vs_merton");

  std::ostringstream buf;
  Csv csv(buf, "path", cols);
  const std::size_t points = ctx.grid.value_or(ctx.cfg.rho_points);
  const PricingKernel k0 = PricingKernel::from_market(mk);
  for (double t : ctx.cfg.times) {
    if (!(t >= 0.0 && t < mk.horizon)) {
      ctx.err << "options.times: " << t << " outside [0, horizon)\n";
      return kConfigError;
    }
    std::vector<double> levels{1.0};
    if (t > 0.0) {
      // ln rho(t) ~ N(mu t / T, sd^2 t / T)
      PricingKernel kt(k0.mu() * t / mk.horizon, k0.sd() * std::sqrt(t / mk.horizon));
      levels = rho_grid(kt, points);
    }
    for (double rho_t : levels) {
      PathPoint p{t, rho_t};
      OptimalPathPoint pp = optimal_path(params, p);
      Eigen::VectorXd ratio = pp.wp.pi / pp.wp.x;
      csv.cell(t).cell(rho_t).cell(pp.wp.x);
      for (Eigen::Index i = 0; i < n; ++i) csv.cell(pp.wp.pi(i));
      for (Eigen::Index i = 0; i < n; ++i) csv.cell(ratio(i));
      for (Eigen::Index i = 0; i < n; ++i) csv.cell(merton(i));
      // Both vectors point along the same direction, so compare scalar multiples.
      Eigen::Index lead = 0;
      merton.cwiseAbs().maxCoeff(&lead);
      double scale = ratio(lead) / merton(lead);
      csv.cell(scale < 1.0 ? std::string("underweight")
                           : scale > 1.0 ? std::string("overweight") : std::string("equal"));
      csv.end();
    }
  }
  ctx.out << buf.str();
  if (auto f = ctx.outputs.open("path.csv")) *f << buf.str();
  return kOk;
}

int cmd_frontier(const Context& ctx) {
  std::ostringstream buf;
  Csv csv(buf, "frontier", {"x0", "tag", "value", "c_star", "x_plus_star"});
  for (double x0 : ctx.cfg.frontier_x0) {
    BehavioralModel m = ctx.model;
    m.x0 = x0;
    Classification c = solve_master(m, ctx.cfg.solver);
    csv.cell(x0).cell(to_string(c.tag)).cell(c.value);
    if (c.claim) csv.cell(c.claim->c_star.as_double()).cell(c.claim->x_plus_star);
    else csv.cell(std::string("nan")).cell(std::string("nan"));
    csv.end();
  }
  ctx.out << buf.str();
  if (auto f = ctx.outputs.open("frontier.csv")) *f << buf.str();
  return kOk;
}

// Two-level claim g on {rho <= c}, -l above, priced at x0.
std::vector<double> two_level(const StateEconomy& e, std::size_t split, double x_plus, double x0) {
  std::vector<double> claim(e.size(), 0.0);
  double gain_mass = 0.0, loss_mass = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    (i < split ? gain_mass : loss_mass) += e.states[i].rho * e.states[i].prob;
  }
  double g = gain_mass > 0.0 ? x_plus / gain_mass : 0.0;
  double l = loss_mass > 0.0 ? (x_plus - x0) / loss_mass : 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) claim[i] = i < split ? g : -l;
  return claim;
}

int cmd_verify(const Context& ctx) {
  const std::size_t n = ctx.grid.value_or(ctx.cfg.oracle_n);
  if (n < 2 || n > 400) {
    ctx.err << "options.oracle_n: " << n << " outside [2, 400]\n";
    return kConfigError;
  }
  const BehavioralModel& m = ctx.model;
  Scheme scheme = ctx.cfg.scheme == "equal_prob" ? Scheme::EqualProb : Scheme::StratifiedTail;
  StateEconomy e = discretize(m.kernel, n, scheme);
  OraclePreferences prefs{m.utility, m.t_plus, m.t_minus};
  OracleResult o = brute_force_master(e, prefs, m.x0);
  Classification c = solve_master(m, ctx.cfg.solver);

  std::ostringstream os;
  os << std::setprecision(12);
  os << "states: " << n << '\n';
  os << "solver_tag: " << to_string(c.tag) << '\n';
  os << "oracle_tag: " << to_string(o.tag) << '\n';
  os << "solver_value: " << c.value << '\n';
  os << "oracle_value: " << o.value << '\n';
  if (o.tag == Tag::IllPosed) {
    os << "oracle escalation:";
    for (double v : o.escalation_values) os << ' ' << v;
    os << '\n';
    emit_report(ctx.outputs, "verify.txt", os.str(), ctx.out);
    return kIllPosed;
  }
  double gap = std::abs(c.value - o.value) / std::max(std::abs(c.value), 1e-12);
  os << "relative_gap: " << gap << '\n';
  os << "oracle local search improvement: " << o.local_improvement << '\n';
  os << "# structure of the oracle claim\n" << audit_table(verify_structure(e, o.claim));
  bool structure_ok = verify_structure(e, o.claim).passed();
  if (c.claim) {
    std::vector<double> solver_claim;
    for (const auto& s : e.states) solver_claim.push_back(c.claim->payoff(s.rho));
    ValidationReport sr = verify_structure(e, solver_claim);
    os << "# structure of the solver claim on the states\n" << audit_table(sr);
    structure_ok = structure_ok && sr.passed();
  }

  // Random two-level competitors priced at x0 must not beat the oracle.
  std::mt19937_64 rng(ctx.seed);
  std::uniform_int_distribution<std::size_t> split_dist(0, n);
  std::uniform_real_distribution<double> log_x(-4.0, 3.0);
  double best_random = -kInf;
  for (int i = 0; i < 1000; ++i) {
    double x_plus = std::max(m.x0, 0.0) + std::pow(10.0, log_x(rng)) * (1.0 + std::abs(m.x0));
    std::size_t split = split_dist(rng);
    if (split == n && x_plus != m.x0) split = n - 1;
    if (split == 0 && x_plus != 0.0) x_plus = 0.0;
    auto claim = two_level(e, split, x_plus, m.x0);
    best_random = std::max(best_random, discrete_cpt_value(e, claim, m.utility, m.t_plus, m.t_minus));
  }
  os << "best of 1000 random two-level claims (seed " << ctx.seed << "): " << best_random << '\n';
  bool dominated = best_random <= o.value + 1e-9 * (1.0 + std::abs(o.value));
  os << "oracle dominates random claims: " << (dominated ? "yes" : "no") << '\n';
  bool ok = gap <= 0.01 && structure_ok && dominated;
  os << "verdict: " << (ok ? "pass" : "fail") << '\n';
  emit_report(ctx.outputs, "verify.txt", os.str(), ctx.out);
  if (c.tag == Tag::IllPosed) return kIllPosed;
  return ok ? kOk : kRegimeMismatch;
}

}  // namespace

// ---------------------------------------------------------------------------

RunConfig parse_config(const std::string& body) {
  json j;
  try {
    j = json::parse(body, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", e.what());
  }
  if (!j.is_object()) throw ConfigError("<document>", "top level must be an object");
  RunConfig cfg;
  MarketParams market = parse_market(require(j, "market", ""));
  PricingKernel kernel = PricingKernel::from_market(market);
  SShapedUtility u = [&] {
    try {
      return parse_utility(require(j, "utility", ""));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError("utility", e.what());
    }
  }();
  Distortion tp = parse_distortion(require(j, "t_plus", ""), "t_plus", kernel);
  Distortion tm = parse_distortion(require(j, "t_minus", ""), "t_minus", kernel);
  double x0 = number(require(j, "x0", ""), "x0");
  cfg.model.emplace(market, u, tp, tm, x0);
  if (j.contains("waive")) {
    const json& w = j["waive"];
    if (!w.is_array()) throw ConfigError("waive", "expected an array of check names");
    for (std::size_t i = 0; i < w.size(); ++i)
      cfg.model->waived.push_back(text(w[i], "waive[" + std::to_string(i) + "]"));
  }

  cfg.times = {0.0, 0.25 * market.horizon, 0.5 * market.horizon, 0.75 * market.horizon};
  for (int i = -4; i <= 4; ++i) cfg.frontier_x0.push_back(0.5 * i);
  if (j.contains("options")) {
    const json& o = j["options"];
    const std::string p = "options";
    if (!o.is_object()) throw ConfigError(p, "expected an object");
    if (o.contains("c_grid")) cfg.solver.c_grid = count_in(o, "c_grid", p, 16, 1u << 20);
    if (o.contains("tol")) cfg.solver.quad.rel_tol = number_in(o, "tol", p, 0.0, 1e-2, true);
    if (o.contains("borderline_band"))
      cfg.solver.borderline_band = number_in(o, "borderline_band", p, 0.0, 0.5);
    if (o.contains("rho_points")) cfg.rho_points = count_in(o, "rho_points", p, 1, 100000);
    if (o.contains("oracle_n")) cfg.oracle_n = count_in(o, "oracle_n", p, 2, 400);
    if (o.contains("scheme")) {
      cfg.scheme = text(o["scheme"], "options.scheme");
      if (cfg.scheme != "stratified_tail" && cfg.scheme != "equal_prob")
        throw ConfigError("options.scheme", "expected stratified_tail or equal_prob");
    }
    if (o.contains("times")) {
      cfg.times = number_list(o["times"], "options.times");
      for (std::size_t i = 0; i < cfg.times.size(); ++i)
        if (cfg.times[i] < 0.0 || cfg.times[i] >= market.horizon)
          throw ConfigError("options.times[" + std::to_string(i) + "]",
                            "outside [0, horizon)");
    }
    if (o.contains("frontier_x0")) cfg.frontier_x0 = number_list(o["frontier_x0"], "options.frontier_x0");
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("--config", "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Continuous-time prospect-theory portfolio solver"};
  app.require_subcommand(1, 1);
  std::string config_path, out_dir;
  std::optional<std::size_t> grid;
  std::optional<double> tol;
  std::uint64_t seed = 12345;
  bool force = false;
  app.add_option("--config", config_path, "JSON model config")->required();
  app.add_option("--out", out_dir, "directory for CSV and report files");
  app.add_option("--grid", grid, "rho grid size (solve, path) or state count (verify)");
  app.add_option("--tol", tol, "relative quadrature tolerance");
  app.add_option("--seed", seed, "seed for randomized competitor claims in verify");
  app.add_flag("--force", force, "run even when the assumption audit fails");
  app.fallthrough();
  for (const char* name : {"audit", "classify", "solve", "path", "frontier", "verify"})
    app.add_subcommand(name);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();  // program name
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  RunConfig cfg;
  try {
    cfg = load_config(config_path);
    if (tol) {
      if (!(*tol > 0.0 && *tol <= 1e-2)) throw ConfigError("--tol", "must lie in (0, 1e-2]");
      cfg.solver.quad.rel_tol = *tol;
    }
    if (grid && *grid == 0) throw ConfigError("--grid", "must be positive");
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "config error: --out: " << e.what() << '\n';
    return kConfigError;
  }

  Context ctx{cfg, *cfg.model, {}, force, seed, grid, out, err};
  if (!out_dir.empty()) ctx.outputs.dir = out_dir;
  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "audit") return cmd_audit(ctx);
    if (cmd == "classify") return cmd_classify(ctx);
    if (cmd == "solve") return cmd_solve(ctx);
    if (cmd == "path") return cmd_path(ctx);
    if (cmd == "frontier") return cmd_frontier(ctx);
    return cmd_verify(ctx);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace cpt::cli
