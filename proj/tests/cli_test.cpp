// Drives the mectl binary end to end through the shell.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "mecontrol/io.hpp"

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mectl_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "plant.json")
        << R"({"A": [[-0.8,0,0],[2,0.1,0],[0.2,1,0.5]], "B": [[1],[0],[0]], "C": [[1,0,0]]})";
  }
  void TearDown() override { fs::remove_all(dir_); }

  /// Runs mectl with `args` from the test directory; returns the exit code.
  int run(const std::string& args) {
    const std::string cmd = "cd '" + dir_.string() + "' && '" MECTL_BINARY "' " + args +
                            " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string slurp(const std::string& name) const {
    std::ifstream in(dir_ / name);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  nlohmann::json json_file(const std::string& name) const {
    return nlohmann::json::parse(slurp(name));
  }

  fs::path dir_;
};

TEST_F(Cli, EstimateCtrbOnFixedPlant) {
  ASSERT_EQ(run("estimate --method ctrb --system plant.json --xf 0.3,1,0.5 --T 8 --out sol"), 0);
  const auto report = json_file("sol.json");
  EXPECT_LE(report["final_error"].get<double>(), 1e-8);
  EXPECT_EQ(report["method"], "ctrb");
  EXPECT_EQ(report["config"]["T"], 8);
  EXPECT_TRUE(report.contains("seed"));
  const auto u = mecontrol::read_csv(dir_ / "sol.csv");
  EXPECT_EQ(u.rows(), 8);
  EXPECT_NEAR(u.norm(), report["input_norm"].get<double>(), 1e-12);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run("estimate --method gramian --data nowhere --xf 1,2,3"), 2);
  EXPECT_EQ(run("estimate --method gramian --xf 1,2,3 --T 8"), 2);  // no system
  EXPECT_EQ(run("estimate --method ctrb --system plant.json --T 8"), 2);  // no target
  EXPECT_EQ(run("estimate --method ctrb --system plant.json --T 8 --xf 1,2,3 --xf-file x.csv"), 2);
  EXPECT_EQ(run("estimate --method magic --system plant.json --xf 1,2,3 --T 8"), 2);
  EXPECT_EQ(run("bench nope"), 2);
  EXPECT_NE(slurp("stderr.txt").find("vs-N, vs-n, noise-bias, demo-2d"), std::string::npos);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("experiment --system plant.json --T 8 --inputs identity --N 5 --seed 1 --out e"),
            2);
}

TEST_F(Cli, ExperimentIsDeterministicAndGuarded) {
  ASSERT_EQ(run("experiment --random-system 20 2 --T 40 --N 100 --seed 7 --out a"), 0);
  ASSERT_EQ(run("experiment --random-system 20 2 --T 40 --N 100 --seed 7 --out b"), 0);
  for (const char* f : {"U.csv", "X.csv", "meta.json", "system.json"}) {
    EXPECT_EQ(slurp(std::string("a/") + f), slurp(std::string("b/") + f)) << f;
  }
  const auto meta = json_file("a/meta.json");
  EXPECT_EQ(meta["seed"], 7);
  EXPECT_EQ(meta["config"]["N"], 100);
  EXPECT_EQ(run("experiment --random-system 20 2 --T 40 --N 100 --seed 7 --out a"), 2);
  EXPECT_EQ(run("experiment --random-system 20 2 --T 40 --N 10 --seed 8 --out a --force"), 0);
  EXPECT_EQ(json_file("a/meta.json")["N"], 10);
}

TEST_F(Cli, MissingSeedIsDrawnAndPrinted) {
  ASSERT_EQ(run("experiment --system plant.json --T 8 --out e"), 0);
  const std::string out = slurp("stdout.txt");
  ASSERT_EQ(out.rfind("seed: ", 0), 0u);
  const auto printed = std::stoull(out.substr(6));
  EXPECT_EQ(json_file("e/meta.json")["seed"].get<std::uint64_t>(), printed);
}

TEST_F(Cli, ExperimentThenDataDrivenEstimate) {
  ASSERT_EQ(run("experiment --system plant.json --T 8 --seed 3 --out e"), 0);
  ASSERT_EQ(run("estimate --method dd-kernel --data e --system plant.json --xf 0.3,1,0.5 "
                "--out e/kernel"),
            0);
  const auto kernel = json_file("e/kernel.json");
  EXPECT_LE(kernel["final_error"].get<double>(), 1e-8);
  EXPECT_EQ(kernel["seed"], 3);
  ASSERT_EQ(run("estimate --method ctrb --system plant.json --xf 0.3,1,0.5 --T 8 --out ctrb"), 0);
  const double optimal = json_file("ctrb.json")["input_norm"];
  EXPECT_NEAR(kernel["input_norm"].get<double>(), optimal, 1e-8 * optimal);

  // Data only: the estimate succeeds and no final error is reported.
  ASSERT_EQ(run("estimate --method dd-pinv --data e --xf 0.3,1,0.5 --out e/pinv"), 0);
  EXPECT_FALSE(json_file("e/pinv.json").contains("final_error"));
}

TEST_F(Cli, AssumptionViolationHasItsOwnExitCode) {
  // Nonzero x0 with N = mT: U has no kernel, so the augmented form cannot apply.
  ASSERT_EQ(run("experiment --system plant.json --T 8 --N 8 --x0-value 1,0,0 --seed 2 --out e"), 0);
  EXPECT_EQ(run("estimate --method dd-kernel --data e --xf 0.3,1,0.5"), 3);
  EXPECT_NE(slurp("stderr.txt").find("1^T w"), std::string::npos);
  ASSERT_EQ(run("experiment --system plant.json --T 8 --N 9 --x0-value 1,0,0 --seed 2 --out f"), 0);
  EXPECT_EQ(run("estimate --method dd-kernel --data f --system plant.json --xf 0.3,1,0.5 --out s"),
            0);
  EXPECT_LE(json_file("s.json")["final_error"].get<double>(), 1e-8);
}

TEST_F(Cli, OutputTarget) {
  ASSERT_EQ(run("experiment --system plant.json --T 8 --inputs identity --seed 1 --out e"), 0);
  ASSERT_EQ(run("estimate --method dd-pinv --data e --system plant.json --yf 0.7 --out y"), 0);
  const auto report = json_file("y.json");
  EXPECT_EQ(report["method"], "dd-pinv-output");
  EXPECT_LE(report["final_error"].get<double>(), 1e-8);
  EXPECT_EQ(run("estimate --method gramian --system plant.json --yf 0.7 --T 8"), 2);
}

TEST_F(Cli, BenchRowCountAndByteIdenticalRerun) {
  ASSERT_EQ(run("bench vs-n --trials 3 --sweep 4,6 --seed 1 --out b1"), 0);
  ASSERT_EQ(run("bench vs-n --trials 3 --sweep 4,6 --seed 1 --out b2"), 0);
  const std::string csv = slurp("b1/vs-n.csv");
  EXPECT_EQ(csv, slurp("b2/vs-n.csv"));
  const auto lines = std::count(csv.begin(), csv.end(), '\n');
  EXPECT_EQ(lines, 1 + 3 * 5 * 2);
  const auto summary = json_file("b1/vs-n_summary.json");
  EXPECT_EQ(summary["seed"], 1);
  EXPECT_EQ(summary["config"]["trials"], 3);
  EXPECT_NE(slurp("stdout.txt").find("dd-asymptotic"), std::string::npos);
}

TEST_F(Cli, BenchNoiseBiasDefaults) {
  ASSERT_EQ(run("bench noise-bias --trials 5 --seed 4 --out nb"), 0);
  const auto cfg = json_file("nb/noise-bias_summary.json")["config"];
  EXPECT_EQ(cfg["T"], 8);
  EXPECT_EQ(cfg["N"], 10);
  EXPECT_EQ(cfg["trials"], 5);
}

TEST_F(Cli, CtrbAndSimulate) {
  ASSERT_EQ(run("ctrb --system plant.json --T 2"), 0);
  EXPECT_EQ(slurp("stdout.txt"), "1,-0.8\n0,2\n0,0.2\n");
  ASSERT_EQ(run("ctrb --system plant.json --T 2 --what output"), 0);
  EXPECT_EQ(slurp("stdout.txt"), "1,-0.8\n");
  ASSERT_EQ(run("ctrb --system plant.json --T 2 --what gramian --out w.csv"), 0);
  const auto w = mecontrol::read_csv(dir_ / "w.csv");
  EXPECT_NEAR(w(0, 0), 1.64, 1e-12);
  EXPECT_NEAR(w(1, 1), 4.0, 1e-12);
  ASSERT_EQ(run("simulate --system plant.json --u 0,1 --x0-value 1,0,0"), 0);
  // x(1) = A x0 + B u(0) with u(0) = 1 (last entry of the stacked input).
  std::istringstream rows(slurp("stdout.txt"));
  std::string line;
  std::getline(rows, line);
  EXPECT_EQ(line, "1,0,0");
  std::getline(rows, line);
  EXPECT_EQ(line, "0.19999999999999996,2,0.2");
}

}  // namespace
