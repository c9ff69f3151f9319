#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "qbt/io.hpp"

using namespace qbt;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int status = -1;
  std::string out;
};

// Runs the command-line tool inside `dir` with the seed-store variable cleared.
CliRun qbt_run(const fs::path& dir, const std::string& args) {
  const std::string cmd =
      "cd '" + dir.string() + "' && env -u QBT_SEED_STORE '" + std::string(QBT_CLI_PATH) + "' " + args + " 2>/dev/null";
  CliRun r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("qbt_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST(Cli, SolveThreeSites) {
  const fs::path dir = scratch("solve3");
  const CliRun r = qbt_run(dir, "solve --n 3 --j0 1 --samples 21 --seed-store store.json");
  ASSERT_EQ(r.status, 0) << r.out;
  const io::json line = io::json::parse(r.out);
  EXPECT_NEAR(line["tau"].get<double>(), 2.7207, 1e-3);
  EXPECT_TRUE(line["converged"].get<bool>());
  const Solution s = io::solution_from_json(io::read_json_file(dir / "solution_n3.json"));
  EXPECT_NEAR(s.tau, 2.7207, 1e-3);
  EXPECT_TRUE(fs::exists(dir / "solution_n3.trajectory.csv"));
  const io::SeedStore store = io::SeedStore::load(dir / "store.json");
  ASSERT_NE(store.find(3), nullptr);
  EXPECT_EQ(store.find(3)->tau_j0, s.tau);
}

TEST(Cli, SolveTwoSites) {
  const fs::path dir = scratch("solve2");
  const CliRun r = qbt_run(dir, "solve --n 2 --j0 1 --out two.json");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NEAR(io::read_json_file(dir / "two.json")["tau"].get<double>(), std::numbers::pi / 2, 1e-6);
}

TEST(Cli, ValidationAndIoExitCodes) {
  const fs::path dir = scratch("codes");
  EXPECT_EQ(qbt_run(dir, "solve --n 3 --tol 1e-3").status, 3);
  EXPECT_EQ(qbt_run(dir, "solve --n 1").status, 3);
  EXPECT_EQ(qbt_run(dir, "solve").status, 3);
  EXPECT_EQ(qbt_run(dir, "solve --n 3 --method newton").status, 3);
  EXPECT_EQ(qbt_run(dir, "simulate missing.json").status, 4);
  io::write_text_file(dir / "bad.json", "{\"format_version\": 1, \"kind\": \"solution\", \"n_sites\": 3}\n");
  EXPECT_EQ(qbt_run(dir, "simulate bad.json").status, 4);
  io::write_text_file(dir / "store.json", "{\"format_version\": 1, \"kind\": \"seed_store\", \"entries\": "
                                          "[{\"n_sites\": 3, \"checksum\": \"0000000000000000\"}]}\n");
  EXPECT_EQ(qbt_run(dir, "solve --n 3 --seed-store store.json").status, 4);
  EXPECT_EQ(qbt_run(dir, "--help").status, 0);
}

TEST(Cli, BaselineAndSimulate) {
  const fs::path dir = scratch("baseline");
  const CliRun b = qbt_run(dir, "baseline --n 10 --kind stepwise --out step.json");
  ASSERT_EQ(b.status, 0);
  const io::json line = io::json::parse(b.out);
  EXPECT_NEAR(line["tau"].get<double>(), 9 * std::numbers::pi / 2, 1e-12);
  EXPECT_GE(line["fidelity"].get<double>(), 1.0 - 1e-12);
  ASSERT_EQ(qbt_run(dir, "simulate step.json --samples 51 --out step.csv").status, 0);
  const auto rows = read_csv(dir / "step.csv");
  ASSERT_EQ(rows.size(), 52u);
  ASSERT_EQ(rows[0].size(), 1u + 9u + 10u + 1u);
  EXPECT_EQ(rows[0].back(), "x_mean");
  EXPECT_EQ(std::stod(rows[1][0]), 0.0);
  EXPECT_EQ(std::stod(rows[1][10]), 1.0);
  for (int n = 2; n <= 10; ++n) EXPECT_EQ(std::stod(rows[1][9 + n]), 0.0);
  EXPECT_NEAR(std::stod(rows.back().back()), 10.0, 1e-6);
  EXPECT_EQ(qbt_run(dir, "baseline --n 4 --kind custom").status, 3);
}

TEST(Cli, SimulateSolvedChain) {
  const fs::path dir = scratch("simulate");
  ASSERT_EQ(qbt_run(dir, "solve --n 15 --out s15.json").status, 0);
  ASSERT_EQ(qbt_run(dir, "simulate s15.json --samples 201 --out s15.csv").status, 0);
  const auto rows = read_csv(dir / "s15.csv");
  ASSERT_EQ(rows.size(), 202u);
  EXPECT_EQ(std::stod(rows[1][15]), 1.0);
  double previous = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double x = std::stod(rows[i].back());
    EXPECT_GE(x, previous - 1e-6) << "row " << i;
    previous = x;
  }
  EXPECT_NEAR(std::stod(rows[1].back()), 1.0, 1e-12);
  EXPECT_NEAR(previous, 15.0, 1e-6);
}

TEST(Cli, SweepFitAndExport) {
  const fs::path dir = scratch("sweep");
  const CliRun s = qbt_run(dir, "sweep --n-min 3 --n-max 6 --out sweep.csv --seed-store store.json --update-store");
  ASSERT_EQ(s.status, 0) << s.out;
  const io::json line = io::json::parse(s.out);
  EXPECT_EQ(line["rows"].get<int>(), 4);
  const auto rows = read_csv(dir / "sweep.csv");
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0][0], "n");
  EXPECT_NEAR(std::stod(rows[1][1]), 2.7207, 1e-3);
  EXPECT_EQ(rows[4][4], "true");

  const CliRun f = qbt_run(dir, "fit sweep.csv");
  ASSERT_EQ(f.status, 0);
  const io::json fit = io::json::parse(f.out);
  EXPECT_NEAR(fit["slope"].get<double>(), line["fit"]["slope"].get<double>(), 1e-12);
  EXPECT_EQ(fit["points"].get<int>(), 4);

  const CliRun e = qbt_run(dir, "export --seed-store store.json");
  ASSERT_EQ(e.status, 0);
  EXPECT_EQ(e.out.substr(0, e.out.find('\n')), "n,tau,fidelity,method,j1_initial,lambda_1_3,lambda_1_4,lambda_1_5,lambda_1_6");
  EXPECT_EQ(std::count(e.out.begin(), e.out.end(), '\n'), 5);

  // Same store and configuration give the same sweep.
  ASSERT_EQ(qbt_run(dir, "sweep --n-min 3 --n-max 6 --out again.csv --seed-store store.json").status, 0);
  ASSERT_EQ(qbt_run(dir, "sweep --n-min 3 --n-max 6 --out again2.csv --seed-store store.json").status, 0);
  EXPECT_EQ(read_csv(dir / "again.csv"), read_csv(dir / "again2.csv"));
}

TEST(Cli, SeedStoreFromEnvironment) {
  const fs::path dir = scratch("env");
  const std::string cmd = "cd '" + dir.string() + "' && QBT_SEED_STORE=env_store.json '" +
                          std::string(QBT_CLI_PATH) + "' solve --n 4 > /dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_NE(io::SeedStore::load(dir / "env_store.json").find(4), nullptr);
}
