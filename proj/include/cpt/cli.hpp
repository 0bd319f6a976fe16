#pragma once

// Batch front end: config parsing and the audit / classify / solve / path /
// frontier / verify commands.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cpt/solver.hpp"

namespace cpt::cli {

/// Stable process exit codes.
enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kBorderline = 3,
  kRegimeMismatch = 4,
  kIllPosed = 5,
};

/// Schema violation; `field` is the dotted path of the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct RunConfig {
  std::optional<BehavioralModel> model;
  SolverOptions solver;
  std::vector<double> times;        ///< path: evaluation times (years)
  std::size_t rho_points = 21;      ///< path / solve: rho grid size
  std::size_t oracle_n = 200;       ///< verify: number of states
  std::string scheme = "stratified_tail";
  std::vector<double> frontier_x0;  ///< frontier: endowments to sweep
};

/// Parses a JSON config text. Throws ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Full command-line entry point; returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cpt::cli
