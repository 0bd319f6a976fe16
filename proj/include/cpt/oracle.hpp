#pragma once

// Finite-state brute-force verification of the continuous solver.

#include <cstddef>
#include <span>
#include <vector>

#include "cpt/kernel.hpp"
#include "cpt/preferences.hpp"
#include "cpt/solver.hpp"

namespace cpt {

struct State {
  double rho = 0.0;
  double prob = 0.0;
};

/// Finitely many priced states, sorted by rho ascending.
struct StateEconomy {
  std::vector<State> states;

  std::size_t size() const { return states.size(); }
  /// Throws DomainError unless probabilities sum to 1 (1e-12) and rho is
  /// strictly increasing and positive.
  void validate() const;
  /// E[rho X].
  double price(std::span<const double> claim) const;
  /// E[rho].
  double mean_rho() const;
};

enum class Scheme { EqualProb, StratifiedTail };

/// Bands of the kernel law; each state carries the band's conditional mean of
/// rho, so E[rho] is preserved. StratifiedTail uses n - 2 bands equally
/// spaced in normal score on [-5.5, 5.5] plus the two tails beyond, which
/// resolves the heavily weighted extremes far better than equal bands.
StateEconomy discretize(const PricingKernel& k, std::size_t n, Scheme scheme = Scheme::EqualProb);

/// V+(X+) - V-(X-) on the state economy.
double discrete_cpt_value(const StateEconomy& e, std::span<const double> claim,
                          const SShapedUtility& u, const Distortion& t_plus,
                          const Distortion& t_minus);

struct OraclePreferences {
  SShapedUtility utility;
  Distortion t_plus;
  Distortion t_minus;
};

struct OracleConfig {
  std::size_t x_grid_per_decade = 12;
  double x_grid_floor = 1e-4;          ///< smallest x+ offset, times (1 + |x0|)
  int escalation_doublings = 10;       ///< x+ bound grows to 2^10 (1 + |x0|)
  bool local_search = true;
  std::size_t max_sweeps = 25;
  double local_search_tol = 1e-3;      ///< relative improvement that counts
};

struct OracleResult {
  Tag tag = Tag::WellPosedAttained;   ///< WellPosedAttained or IllPosed
  std::vector<double> claim;
  double value = 0.0;
  std::size_t split = 0;              ///< gain states are [0, split)
  std::size_t loss_threshold = 0;     ///< loss states are [loss_threshold, n)
  double x_plus = 0.0;
  /// Best value with x+ capped at each doubling of the bound.
  std::vector<double> escalation_values;
  /// Relative gain found by the unstructured local search.
  double local_improvement = 0.0;
  std::string diagnostic;
};

OracleResult brute_force_master(const StateEconomy& e, const OraclePreferences& prefs, double x0,
                                const OracleConfig& cfg = {});

/// Structure report: gains nonincreasing in rho, no idle states next to
/// gains, a single loss level on an upper set, and a lower-set gain event.
ValidationReport verify_structure(const StateEconomy& e, std::span<const double> claim,
                                  double tol = 1e-9);

struct ArrangementCheck {
  double arrangement_price = 0.0;  ///< anti-comonotone arrangement
  double min_price = 0.0;          ///< over all n! permutations
  double max_price = 0.0;
  double comonotone_price = 0.0;
  std::size_t permutations = 0;
};

/// Exhaustive check on an equal-probability economy with n <= 8 states: the
/// anti-comonotone (comonotone) arrangement of `values` attains the minimum
/// (maximum) price over all permutations.
ArrangementCheck exhaustive_arrangement_check(const StateEconomy& e,
                                              std::span<const double> values);

}  // namespace cpt
