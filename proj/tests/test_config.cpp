#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "rwg/config.hpp"

using namespace rwg;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(RWG_CLI) + " " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rwg_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("default config parses and round trips") {
  const RunConfig c = load_config(RWG_DEFAULT_CONFIG);
  CHECK(c.geom.d == 2.0);
  CHECK(c.eps_list.size() == 4);
  const RunConfig d = config_from_json(nlohmann::json::parse(to_json(c).dump()));
  CHECK(to_json(d) == to_json(c));
}

TEST_CASE("config validation") {
  using nlohmann::json;
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"geometry": {}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"schema": "rwg-1", "extra": 1})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"schema": "rwg-1", "fem": {"h_max": "x"}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"schema": "rwg-1", "fem": {"order": 3}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"schema": "rwg-1", "geometry": {"epsilon": 5}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"schema": "rwg-1", "peak": {"heights": [1.2]}})")), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
  const RunConfig c = config_from_json(json::parse(R"({"schema": "rwg-1", "fem": {"h_max": 0.08}})"));
  CHECK(refined(c, 2).fem.h_max == doctest::Approx(0.02));
}

TEST_CASE("command line exit codes") {
  const fs::path out = scratch("cli");
  CHECK(run("constants --out " + out.string()) == 2);
  CHECK(run("compare --config /nonexistent.json") == 2);
  CHECK(run("constants --bogus") == 2);
  CHECK(run("") == 2);
  CHECK(run("--help") == 0);
  CHECK(run("scatter --config " + std::string(RWG_DEFAULT_CONFIG) + " --k2 5 --out " + out.string()) == 2);
}

TEST_CASE("constants subcommand is deterministic") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  REQUIRE(run("constants --config " + std::string(RWG_DEFAULT_CONFIG) + " --out " + a.string()) == 0);
  REQUIRE(run("constants --config " + std::string(RWG_DEFAULT_CONFIG) + " --out " + b.string()) == 0);
  std::ifstream fa(a / "constants.json"), fb(b / "constants.json");
  const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
  CHECK(!sa.empty());
  CHECK(sa == sb);
}

TEST_CASE("scatter and mesh subcommands write their files") {
  const fs::path out = scratch("files");
  const std::string cfg = std::string(RWG_DEFAULT_CONFIG);
  REQUIRE(run("scatter --config " + cfg + " --k2 20 --refine 0 --out " + out.string()) == 0);
  std::ifstream in(out / "scatter.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j.at("M") == 1);
  CHECK(j.at("unitarity_defect").get<double>() < 1e-3);
  REQUIRE(run("mesh --config " + cfg + " --out " + out.string()) == 0);
  for (const char* f : {"waveguide.mesh", "resonator.mesh", "halfstrip.mesh", "omega.mesh"}) CHECK(fs::exists(out / f));
  REQUIRE(run("eigen --config " + cfg + " --count 3 --out " + out.string()) == 0);
  CHECK(fs::exists(out / "eigen.csv"));
}
