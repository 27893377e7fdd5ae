#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "lorcal/report.hpp"

namespace fs = std::filesystem;
using namespace lorcal;

namespace {

const fs::path kWork = fs::temp_directory_path() / "lorcal_cli_test";

int run(const std::string& args, std::string* err = nullptr) {
  fs::create_directories(kWork);
  fs::path e = kWork / "stderr.txt";
  std::string cmd = "cd '" + kWork.string() + "' && '" LORCAL_BIN "' " + args + " > /dev/null 2> '" + e.string() + "'";
  int st = std::system(cmd.c_str());
  if (err) {
    std::ifstream f(e);
    std::stringstream ss;
    ss << f.rdbuf();
    *err = ss.str();
  }
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << s;
}

}  // namespace

TEST(Report, SeventeenDigitsRoundTrip) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) EXPECT_EQ(std::stod(report::num(x)), x);
  EXPECT_EQ(report::num(0.1), "0.10000000000000001");
}

TEST(Report, EmptyTableIsHeaderOnly) {
  report::Csv c({"lambda", "residual"});
  EXPECT_EQ(c.str(), "lambda,residual\n");
  EXPECT_THROW(c.row({1.0}), ConfigError);
}

TEST(Report, EnvelopeHashesConfig) {
  report::json a{{"K", "0"}}, b{{"K", "1"}};
  auto ea = report::envelope("x", a, 3, {}), eb = report::envelope("x", b, 3, {});
  EXPECT_NE(ea["config_hash"], eb["config_hash"]);
  EXPECT_EQ(ea["seed"], 3);
  EXPECT_EQ(ea["version"], report::kVersion);
}

TEST(Cli, UnknownConfigKeyIsNamed) {
  write(kWork / "bad.toml", "[curvature-check]\nmetricc = \"minkowski\"\nK = 0\n");
  std::string err;
  EXPECT_EQ(run("--config bad.toml curvature-check", &err), 1);
  EXPECT_NE(err.find("metricc"), std::string::npos) << err;
}

TEST(Cli, MissingRequiredFieldIsParseError) { EXPECT_EQ(run("curvature-check --metric minkowski"), 1); }

TEST(Cli, FlagsOverrideConfigAndExitCodes) {
  write(kWork / "good.toml", "[curvature-check]\nmetric = \"ultrastatic\"\nK = -0.5\nsamples = 300\n");
  EXPECT_EQ(run("--config good.toml curvature-check --out o1"), 0);
  EXPECT_EQ(run("--config good.toml curvature-check --out o2 --K -1.1"), 2);
  auto j = report::json::parse(slurp(kWork / "o2" / "curvature-check.json"));
  EXPECT_EQ(j["config"]["K"], "-1.1");
  EXPECT_EQ(j["config"]["metric"], "ultrastatic");
}

TEST(Cli, RerunIsByteIdentical) {
  ASSERT_EQ(run("convexity --metric ultrastatic --p 0,0,0 --K -1 --samples 30 --seed 5 --out r1"), 0);
  ASSERT_EQ(run("convexity --metric ultrastatic --p 0,0,0 --K -1 --samples 30 --seed 5 --out r2"), 0);
  EXPECT_EQ(slurp(kWork / "r1" / "convexity.json"), slurp(kWork / "r2" / "convexity.json"));
  EXPECT_EQ(slurp(kWork / "r1" / "convexity.csv"), slurp(kWork / "r2" / "convexity.csv"));
}

TEST(Cli, CarlemanTableHeader) {
  ASSERT_EQ(run("carleman-verify --mode identity --samples 20 --out cv"), 0);
  auto csv = slurp(kWork / "cv" / "carleman.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,x,y,lhs,rhs,residual");
  auto j = report::json::parse(slurp(kWork / "cv" / "carleman-verify.json"));
  EXPECT_TRUE(j["result"]["pass"].get<bool>());
  EXPECT_EQ(j["config_hash"].get<std::string>().size(), 16u);
}

TEST(Cli, ResidualTableHasMonotoneLambda) {
  ASSERT_EQ(run("beam --from 0,0,0 --dir 1,0.6,0.8 --lambda 40,20,80 --out bm"), 0);
  std::istringstream in(slurp(kWork / "bm" / "beam-residual.csv"));
  std::string line;
  std::getline(in, line);
  double prev = 0;
  while (std::getline(in, line)) {
    double l = std::stod(line.substr(0, line.find(',')));
    EXPECT_GT(l, prev);
    prev = l;
  }
  EXPECT_EQ(prev, 80.0);
}

TEST(Cli, NonNullBeamDirectionIsRejected) {
  std::string err;
  EXPECT_EQ(run("beam --from 0,0,0 --dir 1,0.1,0 --out bm2", &err), 1);
  EXPECT_NE(err.find("not null"), std::string::npos);
}

TEST(Cli, UnwritableOutputIsError) {
  write(kWork / "blocker", "x");
  EXPECT_EQ(run("classify --p 0,0,0 --q 0.5,0,0 --out blocker/sub"), 1);
}
