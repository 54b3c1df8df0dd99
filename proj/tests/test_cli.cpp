#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "tunnel_time/scenario.hpp"

using namespace tunnel_time;

namespace {

struct CliResult {
  int code;
  std::string out;
};

CliResult cli(const std::string& args) {
  const std::string out = ::testing::TempDir() + "tt_cli_out.txt";
  const std::string cmd = std::string(TUNNEL_TIME_CLI) + " " + args + " > " + out + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string write_temp(const std::string& name, const std::string& text) {
  const std::string path = ::testing::TempDir() + name;
  std::ofstream(path) << text;
  return path;
}

}  // namespace

TEST(Scenario, DefaultsParse) {
  const Scenario sc = parse_scenario(default_scenario());
  EXPECT_EQ(sc.turning.regime, Regime::Forbidden);
  EXPECT_NEAR(sc.setup.arrival.x, sc.turning.upper, 1e-15);
  ASSERT_TRUE(sc.perturbation.has_value());
  const auto& train = std::get<GaussianTrain>(sc.perturbation->temporal());
  EXPECT_EQ(train.pulses.size(), 7u);
  EXPECT_NEAR(train.pulses[1].center - train.pulses[0].center, 0.99345882657961, 1e-9);
}

TEST(Scenario, Overrides) {
  json doc = default_scenario();
  apply_override(doc, "/energy=50");
  apply_override(doc, "/perturbation/profile/region=[-2,2]");
  apply_override(doc, "/potential/kind=rectangular");
  EXPECT_EQ(doc["energy"], 50);
  EXPECT_EQ(doc["potential"]["kind"], "rectangular");
  EXPECT_THROW(apply_override(doc, "energy"), ConfigError);
}

TEST(Scenario, RejectsInconsistentInput) {
  json doc = default_scenario();
  doc["energy"] = -1.0;
  EXPECT_THROW(parse_scenario(doc), ConfigError);
  doc = default_scenario();
  doc["potential"]["kind"] = "parabolic";
  EXPECT_THROW(parse_scenario(doc), ConfigError);
  doc = default_scenario();
  doc["arrival"]["x"] = 0.0;
  EXPECT_THROW(parse_scenario(doc), ConfigError);
  doc = default_scenario();
  doc["perturbation"]["envelope"]["width"] = 2.0;  // wider than the spacing
  EXPECT_THROW(parse_scenario(doc), ConfigError);
  doc = default_scenario();
  doc["perturbation"]["envelope"]["period"] = 5.0;  // longer than |T|
  EXPECT_THROW(parse_scenario(doc), ConfigError);
}

TEST(Scenario, RampedStepIsContinuous) {
  const SpatialProfile w = ramped_step(0.2, -1.0, 1.0, 0.5);
  EXPECT_DOUBLE_EQ(w.value(0.0), 0.2);
  EXPECT_NEAR(w.value(1.0 + 1e-9), 0.2, 1e-9);
  EXPECT_NEAR(w.value(1.25), 0.1, 1e-15);
  EXPECT_DOUBLE_EQ(w.value(1.6), 0.0);
  EXPECT_NEAR(w.slope(1.25), (w.value(1.25 + 1e-6) - w.value(1.25 - 1e-6)) / 2e-6, 1e-7);
  EXPECT_NEAR(w.slope(-1.25), (w.value(-1.25 + 1e-6) - w.value(-1.25 - 1e-6)) / 2e-6, 1e-7);
}

TEST(Cli, TurningPoints) {
  const CliResult r = cli("turning-points");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "x_lower,x_upper,regime\n-1.76274717404,1.76274717404,Forbidden\n");
  const CliResult a = cli("turning-points --set /energy=50 --set /perturbation=null --format json");
  EXPECT_EQ(a.code, 0);
  EXPECT_NE(a.out.find("\"Allowed\""), std::string::npos);
}

TEST(Cli, Times) {
  const CliResult r = cli("times --format json");
  EXPECT_EQ(r.code, 0);
  const json j = json::parse(r.out);
  EXPECT_NEAR(j["time"]["im"].get<double>(), 0.99345882658, 1e-8);
  const std::string rect = write_temp("rect.json", R"({"potential": {"kind": "rectangular", "height": 4,
      "left": 0, "right": 3}, "energy": 2, "perturbation": null})");
  const json k = json::parse(cli("times --format json --scenario " + rect).out);
  EXPECT_NEAR(k["time"]["im"].get<double>(), 1.5, 1e-10);
  const std::string free = write_temp("free.json", R"({"potential": {"kind": "free"}, "energy": 2,
      "x_min": -1, "perturbation": {"profile": {"kind": "step", "w0": 0.1, "region": [0, 4]},
      "envelope": {"kind": "constant"}}})");
  const json f = json::parse(cli("times --format json --scenario " + free).out);
  EXPECT_NEAR(f["time"]["re"].get<double>(), 2.0, 1e-10);
}

TEST(Cli, Table1Deterministic) {
  const std::string p1 = ::testing::TempDir() + "t1a.csv", p2 = ::testing::TempDir() + "t1b.csv";
  ASSERT_EQ(cli("table1 --out " + p1).code, 0);
  ASSERT_EQ(cli("table1 --out " + p2).code, 0);
  std::ifstream a(p1, std::ios::binary), b(p2, std::ios::binary);
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_NE(sa.str().find("\n0,1,1\n"), std::string::npos);
  EXPECT_EQ(sa.str().find('\r'), std::string::npos);
}

TEST(Cli, AdiabaticSweepSlope) {
  const CliResult r = cli("adiabatic --format json --set /energy=50 --set '/perturbation/profile/region=[-2,2]' "
                    "--set '/perturbation/envelope={\"kind\":\"constant\"}'");
  ASSERT_EQ(r.code, 0) << r.out;
  const json j = json::parse(r.out);
  EXPECT_NEAR(j["slope"].get<double>(), 2.0, 0.1);
  const CliResult csv = cli("adiabatic");
  EXPECT_EQ(csv.out.rfind("omega,relative_error\n", 0), 0u);
}

TEST(Cli, DensityWithoutPerturbation) {
  const CliResult r = cli("density --set /perturbation=null --format json");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(json::parse(r.out)["ratio"].get<double>(), 1.0);
}

TEST(Cli, ExitCodes) {
  const std::string bad = write_temp("bad.json", "{\"energy\": ");
  const CliResult r = cli("times --scenario " + bad);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("parse error"), std::string::npos);
  EXPECT_EQ(cli("times --set /energy=-3").code, 2);
  EXPECT_EQ(cli("times --format xml").code, 2);
  EXPECT_EQ(cli("nonsense").code, 2);
  // current correction is an allowed-regime observable
  EXPECT_EQ(cli("current").code, 1);
}

TEST(Cli, TrajectoryCsv) {
  const CliResult r = cli("trajectory --set /trajectory/samples=10");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("re_tau,im_tau,x\n", 0), 0u);
  int lines = 0;
  for (char c : r.out) lines += c == '\n';
  EXPECT_EQ(lines, 1 + 11 + 10);  // header, upstream, descent (zero-length exit leg skipped)
}

TEST(Cli, ValidityJson) {
  const CliResult r = cli("validity --format json --set /perturbation/profile/w0=1e-6");
  ASSERT_EQ(r.code, 0);
  const json j = json::parse(r.out);
  EXPECT_TRUE(j["flags"].empty());
}
