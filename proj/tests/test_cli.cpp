#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cpt/cli.hpp"

namespace fs = std::filesystem;
using namespace cpt;

namespace {

const char* kBaseline = R"({
  "market": {"rate": 0.05, "excess_return": [0.04], "volatility": [[0.2]], "horizon": 1.0},
  "utility": {"type": "crra", "alpha": 0.88, "k_minus": 2.25},
  "t_plus": {"type": "reversed_s", "c0": 1.0, "a": -0.5, "b": 0.5},
  "t_minus": {"type": "tversky_kahneman", "delta": 0.69},
  "x0": X0
})";

std::string with(std::string text, const std::string& key, const std::string& value) {
  auto pos = text.find(key);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, key.size(), value);
}

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch() {
  static int counter = 0;
  auto dir = fs::temp_directory_path() / ("cpt_cli_test_" + std::to_string(::getpid()) + "_" +
                                          std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Run run_cli(const std::string& config_text, const std::string& args, const fs::path& dir) {
  const char* bin = std::getenv("CPT_CLI");
  REQUIRE_MESSAGE(bin != nullptr, "CPT_CLI must point at the cpt_cli binary");
  auto cfg = dir / "config.json";
  std::ofstream(cfg) << config_text;
  std::string cmd = std::string(bin) + " --config " + cfg.string() + " " + args + " > " +
                    (dir / "stdout.txt").string() + " 2> " + (dir / "stderr.txt").string();
  int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(dir / "stdout.txt");
  r.err = slurp(dir / "stderr.txt");
  return r;
}

std::string baseline(double x0) {
  std::ostringstream os;
  os << x0;
  return with(kBaseline, "X0", os.str());
}

}  // namespace

TEST_CASE("config parsing reports the offending field") {
  auto cfg = cli::parse_config(baseline(-1.0));
  REQUIRE(cfg.model.has_value());
  CHECK(cfg.model->x0 == -1.0);
  CHECK(cfg.model->kernel.mu() == doctest::Approx(-0.07));

  auto field_of = [](const std::string& text) {
    try {
      cli::parse_config(text);
    } catch (const cli::ConfigError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of(with(baseline(1.0), "\"alpha\": 0.88", "\"alpha\": 1.5")) == "utility.alpha");
  CHECK(field_of(with(baseline(1.0), "\"b\": 0.5", "\"b\": 1.5")) == "t_plus.b");
  CHECK(field_of(with(baseline(1.0), "\"rate\": 0.05, ", "")) == "market.rate");
  CHECK(field_of(with(baseline(1.0), "tversky_kahneman", "wobbly")) == "t_minus.type");
  CHECK(field_of(with(baseline(1.0), "[[0.2]]", "[[0.0]]")) == "market");
  CHECK(field_of("{\"market\": ") == "<document>");
}

TEST_CASE("audit: baseline passes, identity loss distortion warns") {
  auto dir = scratch();
  auto r = run_cli(baseline(-1.0), "--out " + (dir / "o").string() + " audit", dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("overall: pass") != std::string::npos);
  CHECK(fs::exists(dir / "o" / "audit.txt"));

  auto trap = with(baseline(1.0), R"({"type": "tversky_kahneman", "delta": 0.69})", R"({"type": "identity"})");
  r = run_cli(trap, "audit", dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("loss_distortion_trap") != std::string::npos);
  CHECK(r.out.find("warning") != std::string::npos);
}

TEST_CASE("malformed config exits with code 2 and names the field") {
  auto dir = scratch();
  auto r = run_cli(with(baseline(1.0), "\"k_minus\": 2.25", "\"k_minus\": -1"), "audit", dir);
  CHECK(r.code == 2);
  CHECK(r.err.find("utility.k_minus") != std::string::npos);
  r = run_cli("{ not json", "audit", dir);
  CHECK(r.code == 2);
  CHECK(r.err.find("line") != std::string::npos);
  r = run_cli(baseline(1.0), "frobnicate", dir);
  CHECK(r.code == 2);
}

TEST_CASE("classify writes the k curve; literal both-sided reversed-S is ill-posed") {
  auto dir = scratch();
  auto r = run_cli(baseline(-1.0), "--out " + dir.string() + " classify", dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("WellPosedAttained") != std::string::npos);
  auto csv = slurp(dir / "k_curve.csv");
  CHECK(csv.rfind("# cpt classify v1", 0) == 0);
  CHECK(csv.find("\nc,k,G\n") != std::string::npos);

  auto literal = with(baseline(1.0), R"({"type": "tversky_kahneman", "delta": 0.69})",
                      R"({"type": "reversed_s", "c0": 1.0, "a": -0.5, "b": 0.5})");
  r = run_cli(literal, "classify", dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("IllPosed") != std::string::npos);
}

TEST_CASE("borderline inf k exits with code 3") {
  auto m = *cli::parse_config(baseline(-1.0)).model;
  auto c = classify_wellposedness(m);
  REQUIRE(c.inf_k.has_value());
  std::ostringstream k;
  k << std::setprecision(17) << 2.25 / *c.inf_k;
  auto text = with(baseline(-1.0), "\"k_minus\": 2.25", "\"k_minus\": " + k.str());
  auto dir = scratch();
  auto r = run_cli(text, "classify", dir);
  CHECK(r.code == 3);
  CHECK(r.out.find("Borderline") != std::string::npos);
}

TEST_CASE("solve writes a claim table and summary; ill-posed exits 5") {
  auto dir = scratch();
  auto r = run_cli(baseline(-1.0), "--out " + dir.string() + " --grid 11 solve", dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("c_star: 0.9035284") != std::string::npos);
  CHECK(r.out.find("value: -1.683325") != std::string::npos);
  CHECK(r.out.find("budget_residual:") != std::string::npos);
  auto csv = slurp(dir / "claim.csv");
  CHECK(csv.rfind("# cpt solve v1 columns: rho X\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);

  auto trap = with(baseline(1.0), R"({"type": "tversky_kahneman", "delta": 0.69})", R"({"type": "identity"})");
  r = run_cli(trap, "--force solve", dir);
  CHECK(r.code == 5);
  CHECK(r.out.find("supremum: inf") != std::string::npos);
}

TEST_CASE("CSV cells carry 12 significant digits and runs are byte-identical") {
  auto d1 = scratch(), d2 = scratch();
  REQUIRE(run_cli(baseline(-1.0), "--out " + d1.string() + " solve", d1).code == 0);
  REQUIRE(run_cli(baseline(-1.0), "--out " + d2.string() + " solve", d2).code == 0);
  auto a = slurp(d1 / "claim.csv");
  CHECK(a == slurp(d2 / "claim.csv"));
  std::istringstream lines(a);
  std::string line;
  std::getline(lines, line);
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      std::string mant = cell.substr(0, cell.find('e'));
      std::string digits;
      for (char ch : mant)
        if (std::isdigit(static_cast<unsigned char>(ch))) digits += ch;
      digits.erase(0, digits.find_first_not_of('0'));
      CHECK(digits.size() <= 12);
    }
  }
  auto v1 = scratch(), v2 = scratch();
  REQUIRE(run_cli(baseline(-1.0), "--seed 7 --grid 60 verify", v1).code == 0);
  REQUIRE(run_cli(baseline(-1.0), "--seed 7 --grid 60 verify", v2).code == 0);
  CHECK(slurp(v1 / "stdout.txt") == slurp(v2 / "stdout.txt"));
}

TEST_CASE("path: regime mismatch and the gains-only table") {
  auto dir = scratch();
  auto r = run_cli(baseline(-1.0), "path", dir);
  CHECK(r.code == 4);
  r = run_cli(baseline(1.0), "--grid 5 path", dir);
  CHECK(r.code == 0);
  CHECK(r.out.rfind("# cpt path v1 columns: t rho_t x pi_1 ratio_1 merton_1 vs_merton", 0) == 0);
  CHECK(r.out.find("\n0,1,1,") != std::string::npos);  // x*(0) = x0
  auto rows = std::count(r.out.begin(), r.out.end(), '\n');
  CHECK(rows == 2 + 1 + 3 * 5);
}

TEST_CASE("frontier sweeps endowments") {
  auto dir = scratch();
  auto text = with(baseline(1.0), "\"x0\": 1", "\"x0\": 1, \"options\": {\"frontier_x0\": [-1, 0, 1]}");
  auto r = run_cli(text, "frontier", dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("\n-1,WellPosedAttained,-1.68332511") != std::string::npos);
  CHECK(r.out.find("\n0,WellPosedAttained,0,") != std::string::npos);
}

TEST_CASE("verify: agreement on the baseline, escalation exits 5") {
  auto dir = scratch();
  auto r = run_cli(baseline(-1.0), "--grid 200 verify", dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("verdict: pass") != std::string::npos);
  auto literal = with(baseline(1.0), R"({"type": "tversky_kahneman", "delta": 0.69})",
                      R"({"type": "reversed_s", "c0": 1.0, "a": -0.5, "b": 0.5})");
  r = run_cli(literal, "--grid 50 verify", dir);
  CHECK(r.code == 5);
  r = run_cli(baseline(-1.0), "--grid 401 verify", dir);
  CHECK(r.code == 2);
}
