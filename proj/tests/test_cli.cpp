#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "shoot/cli.hpp"

using namespace shoot;
using namespace shoot::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("shoot_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

int config_exit(const json& j) {
  try {
    parse_run_config(j);
  } catch (const Error& e) {
    return e.exit_code();
  }
  return 0;
}

json eval_config() {
  return json::parse(R"({"command": "eval", "potential": {"builtin": "exp_wall"},
                         "grid": {"re_min": -10, "re_max": 110, "n": 41}, "threads": 1})");
}

}  // namespace

TEST(Parse, Commands) {
  EXPECT_EQ(parse_command("oracle-compare"), Command::oracle_compare);
  EXPECT_EQ(parse_command("eigs"), Command::eigs);
  EXPECT_FALSE(parse_command("eigenvalues").has_value());
}

TEST(Parse, ConfigErrorsExitTen) {
  EXPECT_EQ(config_exit(json::parse(R"({"command": "nonsense"})")), 10);
  EXPECT_EQ(config_exit(json::parse(R"({"command": "eval", "potential": {"builtin": "exp_wall"}})")), 10);
  EXPECT_EQ(config_exit(json::parse(R"({"command": "eigs", "potential": {"builtin": "exp_wall"}})")), 10);
  EXPECT_EQ(config_exit(json::parse(R"({"command": "eval", "potential": {"builtin": "nope"}, "energies": [1]})")), 10);
  EXPECT_EQ(config_exit(json::parse(R"({"command": "eval", "potential": {"builtin": "exp_wall"},
                                        "energies": [1], "constants": {"c": 0.3}})")), 10);
  EXPECT_EQ(config_exit(json::parse(R"([1, 2])")), 10);
  EXPECT_EQ(config_exit(json::parse(R"({"command": "oracle-compare", "potential": {"builtin": "exp_wall"},
                                        "energies": [1]})")), 10);
}

TEST(Parse, EnergiesAndGrid) {
  auto rc = parse_run_config(json::parse(R"({"command": "eval", "potential": {"builtin": "exp_wall"},
                                             "energies": [1.5, [2, -3]]})"));
  ASSERT_EQ(rc.energies.size(), 2u);
  EXPECT_EQ(rc.energies[1], cplx(2, -3));
  rc = parse_run_config(eval_config());
  ASSERT_EQ(rc.energies.size(), 41u);
  EXPECT_DOUBLE_EQ(rc.energies.back().real(), 110.0);
  EXPECT_EQ(rc.threads, 1u);
}

TEST(Parse, OverridesReachConfig) {
  auto j = eval_config();
  j["tolerances"] = {{"tol", 1e-11}};
  j["mesh"] = {{"density", 3.0}};
  const auto rc = parse_run_config(j);
  EXPECT_EQ(rc.cfg.tol, 1e-11);
  EXPECT_EQ(rc.cfg.mesh_density, 3.0);
}

TEST(Format, ShortestRoundTrip) {
  EXPECT_EQ(fmt(0.1), "0.1");
  EXPECT_EQ(std::stod(fmt(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Hash, StableAndSensitive) {
  const auto a = eval_config(), b = eval_config();
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  auto c = eval_config();
  c["grid"]["n"] = 42;
  EXPECT_NE(config_hash(a), config_hash(c));
}

TEST(Run, EvalWritesCsvAndMeta) {
  const auto out = scratch("eval");
  const auto res = run(parse_run_config(eval_config()), out);
  EXPECT_EQ(res.exit_code, 0);
  const auto rows = lines(out / "eval.csv");
  ASSERT_EQ(rows.size(), 42u);
  EXPECT_EQ(rows[0].rfind("Re_E,", 0), 0u);
  const auto meta = json::parse(slurp(out / "meta.json"));
  for (auto key : {"config_hash", "command", "threads", "constants", "potential", "shift", "x0", "exit_code"})
    EXPECT_TRUE(meta.contains(key)) << key;
  EXPECT_EQ(meta["exit_code"], 0);
  EXPECT_TRUE(fs::exists(out / "summary.json"));
}

TEST(Run, Deterministic) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  run(parse_run_config(eval_config()), a);
  run(parse_run_config(eval_config()), b);
  EXPECT_EQ(slurp(a / "eval.csv"), slurp(b / "eval.csv"));
  EXPECT_EQ(slurp(a / "meta.json"), slurp(b / "meta.json"));
}

TEST(Run, ErrorRecordedInMeta) {
  const auto out = scratch("err");
  // the cone condition cannot hold for any x at this energy on a tabulated finite range
  auto j = json::parse(R"({"command": "eval", "potential": {"builtin": "exp_wall"},
                           "energies": [[0, 1e9], 1]})");
  const auto res = run(parse_run_config(j), out);
  EXPECT_NE(res.exit_code, 0);
  const auto meta = json::parse(slurp(out / "meta.json"));
  ASSERT_TRUE(meta.contains("error"));
  EXPECT_TRUE(meta["error"].contains("family"));
  EXPECT_EQ(meta["exit_code"], res.exit_code);
}

TEST(Run, OracleCommand) {
  const auto out = scratch("oracle");
  auto j = json::parse(R"({"command": "oracle", "oracle": {"function": "bessel_k", "nu": 0.5, "z": 1.0}})");
  const auto res = run(parse_run_config(j), out);
  ASSERT_EQ(res.exit_code, 0);
  EXPECT_NEAR(res.summary["value"][0].get<double>(), std::sqrt(std::numbers::pi / 2) * std::exp(-1.0), 1e-13);
  EXPECT_EQ(res.summary["method"], "integral_quadrature");
  EXPECT_EQ(lines(out / "oracle.csv").size(), 2u);
}

TEST(Run, UnknownOracleFunction) {
  const auto res = run(parse_run_config(json::parse(R"({"command": "oracle", "oracle": {"function": "airy"}})")),
                       scratch("oracle_bad"));
  EXPECT_EQ(res.exit_code, 10);
}

TEST(Run, WidthCommand) {
  const auto out = scratch("width");
  auto j = json::parse(R"({"command": "width", "potential": {"builtin": "cosh_pot"}, "levels": [1e3, 1e6, 1e9]})");
  const auto res = run(parse_run_config(j), out);
  ASSERT_EQ(res.exit_code, 0);
  EXPECT_EQ(lines(out / "width.csv").size(), 4u);
  EXPECT_LT(res.summary["max_scaled_residual"].get<double>(), 10.0);
}

TEST(Run, OracleCompareMorse) {
  const auto out = scratch("cmp");
  auto j = json::parse(R"({"command": "oracle-compare", "potential": {"builtin": "truncated_morse", "kappa": 2.25},
                           "energies": [-5, -10, [-20, 5]], "threads": 1})");
  const auto res = run(parse_run_config(j), out);
  ASSERT_EQ(res.exit_code, 0);
  EXPECT_EQ(lines(out / "oracle_compare.csv").size(), 4u);
}
