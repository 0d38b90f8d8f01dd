#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rvmc/cli.hpp"
#include "rvmc/oracles.hpp"

using namespace rvmc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rvmc_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> readCsv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::string errorOf(std::string_view text) {
  try {
    parseConfigText(text).validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

int runMain(std::vector<std::string> args) {
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return runCli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("minimal config gets the documented defaults") {
  const auto cfg = parseConfigText("command = oracle\nalpha = 0.5, 1\nT = 0\n");
  CHECK((cfg.command == Command::oracle));
  CHECK(cfg.alphas == std::vector<double>{0.5, 1.0});
  CHECK(cfg.temperatures == std::vector<double>{0.0});
  CHECK(cfg.num_sites == 100000);
  CHECK(cfg.burn_in == 1000);
  CHECK(cfg.seed == 0);
  CHECK(cfg.risk == 0.0);
  CHECK(cfg.depths == std::vector<int>{0});
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("config syntax") {
  const auto cfg = parseConfigText(
      "# comment line\n"
      "command = mixed   # trailing comment\n"
      "alpha = 1.15\n"
      "T = 0.25, 0.5, 1\n"
      "n = 0, 1, 2, 3\n"
      "num_sites = 1e5\n"
      "burn_in = 1000\n"
      "seed = 12\n"
      "kappa = 0.5\n"
      "workers = 2\n"
      "output = results\n");
  CHECK((cfg.command == Command::mixed));
  CHECK(cfg.depths == std::vector<int>{0, 1, 2, 3});
  CHECK(cfg.num_sites == 100000);
  CHECK(cfg.seed == 12);
  CHECK(cfg.risk == 0.5);
  CHECK(cfg.workers == 2);
  CHECK(cfg.output == fs::path("results"));
}

TEST_CASE("config errors name the problem") {
  const auto burn = errorOf("command = oracle\nalpha = 1\nT = 0\nnum_sites = 100\nburn_in = 100\n");
  CHECK(burn.find("burn_in") != std::string::npos);
  CHECK(burn.find("num_sites") != std::string::npos);

  const auto dup = errorOf("command = oracle\nalpha = 1\nT = 0\nalpha = 2\n");
  CHECK(dup.find("line 4") != std::string::npos);
  CHECK(dup.find("line 2") != std::string::npos);

  CHECK(errorOf("command = oracle\nalpha = 1\nT = 0\nbogus = 3\n").find("line 4") != std::string::npos);
  CHECK(errorOf("command = oracle\nalpha = x\nT = 0\n").find("line 2") != std::string::npos);
  CHECK(errorOf("command = oracle\nalpha = 1\nT = 0\nn = 1.5\n").find("line 4") != std::string::npos);
  CHECK(errorOf("command = nothing\nalpha = 1\nT = 0\n").find("line 1") != std::string::npos);
  CHECK(errorOf("command = oracle\nalpha = 1\nT\n").find("line 3") != std::string::npos);
  CHECK_FALSE(errorOf("command = oracle\nT = 0\n").empty());
  CHECK_FALSE(errorOf("command = pure\nalpha = 1\nT = 1\n").empty());
  CHECK_FALSE(errorOf("command = oracle\nalpha = 1\nT = -1\n").empty());
  CHECK_FALSE(errorOf("command = oracle\nalpha = 1\nT = 0\nkappa = -1\n").empty());
  CHECK_FALSE(errorOf("command = mixed\nalpha = 1\nT = 1\nn = 10\n").empty());
  CHECK(errorOf("command = oracle\nalpha = 1\nT = 0\n").empty());
}

TEST_CASE("oracle command table") {
  const auto dir = scratch("oracle");
  auto cfg = parseConfigText("command = oracle\nalpha = 0.5, 1, 1.15, 2\nT = 0\n");
  cfg.output = dir;
  std::ostringstream log;
  REQUIRE(runExperiment(cfg, log) == kExitOk);
  const auto rows = readCsv(dir / "oracle.csv");
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].size() == 10);
  CHECK(rows[0][9] == "error_per_scale");
  const double alphas[] = {0.5, 1.0, 1.15, 2.0};
  for (int i = 0; i < 4; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i + 1)];
    const double a = std::stod(r[0]);
    CHECK(a == alphas[i]);
    CHECK(std::stod(r[5]) == tfimExact(a, 0.0));
    CHECK(std::stod(r[6]) == secondOrderReference(a, 0.0));
    CHECK(std::stod(r[3]) == std::stod(r[5]));
    // error_per_scale is recomputable from the row.
    CHECK(std::abs(std::stod(r[9]) - (std::stod(r[3]) - std::stod(r[5])) / (1 + a)) <= 1e-12);
    CHECK(std::abs(std::stod(r[8]) - (std::stod(r[3]) - std::stod(r[6]))) <= 1e-12);
  }
}

TEST_CASE("classical command is deterministic across worker counts") {
  const std::string text =
      "command = classical\nalpha = 0.5, 1\nT = 3, 1\nn = 0, 1\nnum_sites = 4000\nburn_in = 500\n"
      "opt_sites = 2000\nmax_iters = 5\n";
  std::string first_csv, first_trace;
  for (int workers : {1, 3, 1}) {
    const auto dir = scratch("classical" + std::to_string(workers));
    auto cfg = parseConfigText(text);
    cfg.output = dir;
    cfg.workers = workers;
    std::ostringstream log;
    REQUIRE(runExperiment(cfg, log) == kExitOk);
    const std::string csv = slurp(dir / "classical.csv");
    const std::string trace = slurp(dir / "classical_trace.csv");
    if (first_csv.empty()) {
      first_csv = csv;
      first_trace = trace;
    }
    CHECK(csv == first_csv);
    CHECK(trace == first_trace);
  }
  const auto rows = readCsv(fs::temp_directory_path() / "rvmc_cli_test_classical1" / "classical.csv");
  REQUIRE(rows.size() == 9);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double a = std::stod(rows[i][0]);
    CHECK(std::abs(std::stod(rows[i][9]) - (std::stod(rows[i][3]) - std::stod(rows[i][5])) / (1 + a)) <= 1e-12);
    CHECK(rows[i][6] == "nan");
  }
}

TEST_CASE("linesearch command layout") {
  const auto dir = scratch("linesearch");
  auto cfg = parseConfigText("command = linesearch\nalpha = 0.5\nT = 3\nsamples = 100, 1000\npoints = 3\n");
  cfg.output = dir;
  std::ostringstream log;
  REQUIRE(runExperiment(cfg, log) == kExitOk);
  const auto rows = readCsv(dir / "linesearch.csv");
  REQUIRE(rows.size() == 7);
  CHECK(rows[0] == std::vector<std::string>{"alpha", "T", "x", "samples", "free_energy", "stderr"});
  CHECK(rows[1][2] == "0");
  CHECK(rows[2][2] == "0.5");
  CHECK(rows[6][3] == "1000");
}

TEST_CASE("exit codes") {
  const auto dir = scratch("exit");
  const auto good = dir / "good.cfg";
  std::ofstream(good) << "command = oracle\nalpha = 1\nT = 0.5\n";
  CHECK(runMain({"robust-vmc", good.string(), "--output", (dir / "out").string()}) == kExitOk);
  CHECK(fs::exists(dir / "out" / "oracle.csv"));

  const auto bad = dir / "bad.cfg";
  std::ofstream(bad) << "command = oracle\nalpha = 1\n";
  CHECK(runMain({"robust-vmc", bad.string()}) == kExitConfig);
  CHECK(runMain({"robust-vmc", (dir / "missing.cfg").string()}) == kExitConfig);
  CHECK(runMain({"robust-vmc"}) == kExitConfig);
  CHECK(runMain({"robust-vmc", good.string(), "--seed", "abc"}) == kExitConfig);

  // Flag overrides are validated like file keys.
  const auto mixed = dir / "mixed.cfg";
  std::ofstream(mixed) << "command = mixed\nalpha = 1\nT = 1\nburn_in = 1000\n";
  CHECK(runMain({"robust-vmc", mixed.string(), "--sites", "500"}) == kExitConfig);

  // The output directory cannot be created under a regular file.
  CHECK(runMain({"robust-vmc", good.string(), "--output", (good / "sub").string()}) == kExitRuntime);
}
