#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "tamed/io.hpp"

using namespace tamed;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

// Runs tamedns with `args`; stderr is folded into the captured output.
Result run(const std::string& args) {
  const std::string cmd = std::string(TAMEDNS_BINARY) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  while (std::fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("tamed_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& content) {
    std::ofstream(dir_ / name) << content;
    return (dir_ / name).string();
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

Json energy_rows(const std::string& csv_path) {
  Json rows = Json::array();
  std::ifstream in(csv_path);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    Json row = Json::array();
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      row.push_back(std::stod(line.substr(start, comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(row);
  }
  return rows;
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> fa, fb;
  for (auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) fa.push_back(fs::relative(e.path(), a));
  for (auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) fb.push_back(fs::relative(e.path(), b));
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  if (fa != fb) return false;
  for (const auto& f : fa)
    if (read_file(a / f) != read_file(b / f)) return false;
  return true;
}

const char* kNoisy = R"({
  "problem": {"grid": 8, "u0": {"preset": "random", "decay": 2.0, "scale": 1.0, "seed": 3}},
  "noise": {"marks": [1.0, 0.5], "cutoff": 2, "scales": [0.4, -0.2],
            "additive": [{"preset": "random", "decay": 2.0, "scale": 0.3, "seed": 5}, {"preset": "zero"}]},
  "control": {"time_grid": [0.0, 0.05, 0.1], "marks": 2, "values": [1.5, 0.5, 0.8, 1.2]},
  "solver": {"dt": 0.01, "T": 0.1, "eps": 0.1, "snapshot_stride": 5},
  "experiment": {"replicas": 6, "eps_ladder": [0.2, 0.1], "trials": 10, "statistical_replicas": 500},
  "seed": 11
})";

}  // namespace

TEST_F(Cli, CostExamples) {
  auto unit = run("cost --control " + write("g1.json", R"({"time_grid": [0, 1], "marks": 1, "values": [1]})"));
  EXPECT_EQ(unit.code, 0);
  EXPECT_EQ(unit.out, "0\n");
  auto two = run("cost --control " + write("g2.json", R"({"time_grid": [0, 1], "marks": 1, "values": [2]})") +
                 " --marks 1 --horizon 1");
  EXPECT_EQ(two.code, 0);
  EXPECT_EQ(two.out, "0.386294361120\n");
  auto weighted = run("cost --control " + path("g2.json") + " --marks 0.5");
  EXPECT_EQ(weighted.out, "0.193147180560\n");
}

TEST_F(Cli, CostErrors) {
  auto neg = run("cost --control " +
                 write("neg.json", R"({"time_grid": [0, 1, 2], "marks": 2, "values": [1, 1, 1, -0.5]})"));
  EXPECT_EQ(neg.code, 2);
  EXPECT_NE(neg.out.find("cell (1, 1)"), std::string::npos) << neg.out;
  auto syntax = run("cost --control " + write("bad.json", "{\"time_grid\": [0, 1],\n  \"marks\": 1 \"values\": [1]}"));
  EXPECT_EQ(syntax.code, 2);
  EXPECT_NE(syntax.out.find("line 2, column"), std::string::npos) << syntax.out;
  auto mismatch = run("cost --control " + path("neg.json") + " --marks 1");
  EXPECT_EQ(mismatch.code, 2);
  auto horizon = run("cost --control " + write("g.json", R"({"time_grid": [0, 1], "marks": 1, "values": [2]})") +
                     " --horizon 2");
  EXPECT_EQ(horizon.code, 2);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("skeleton").code, 2);
  EXPECT_EQ(run("verify bogus").code, 2);
  EXPECT_EQ(run("skeleton --config " + path("missing.json")).code, 2);
}

TEST_F(Cli, SkeletonZeroPresetWritesZeros) {
  auto cfg = write("zero.json", R"({
    "problem": {"grid": 8, "u0": {"preset": "zero"}},
    "control": {"time_grid": [0, 0.1], "marks": 1, "values": [1]},
    "solver": {"dt": 0.01, "T": 0.1}
  })");
  auto r = run("skeleton --config " + cfg + " --out " + path("out"));
  ASSERT_EQ(r.code, 0) << r.out;
  auto rows = energy_rows(path("out/energy.csv"));
  ASSERT_EQ(rows.size(), 11u);
  for (auto& row : rows) {
    EXPECT_EQ(row[1].get<double>(), 0.0);
    EXPECT_EQ(row[2].get<double>(), 0.0);
    EXPECT_EQ(row[3].get<double>(), 0.0);
  }
  EXPECT_TRUE(fs::exists(path("out/manifest.json")));
  EXPECT_TRUE(fs::exists(path("out/final.sfld")));
}

TEST_F(Cli, SkeletonShearMatchesClosedForm) {
  const double a = 0.8, T = 0.2;
  auto cfg = write("shear.json", R"({
    "problem": {"grid": 8, "u0": {"preset": "shear", "a": 0.8}},
    "control": {"time_grid": [0, 0.2], "marks": 1, "values": [1]},
    "solver": {"dt": 0.001, "T": 0.2, "snapshot_stride": 50}
  })");
  auto r = run("skeleton --config " + cfg + " --out " + path("out"));
  ASSERT_EQ(r.code, 0) << r.out;
  auto final_field = read_sfld(path("out/final.sfld"));
  EXPECT_EQ(final_field.time, T);
  const double pi = std::numbers::pi;
  const double exact = a * std::exp(-4.0 * pi * pi * T) * std::sqrt(0.5 * (1.0 + 4.0 * pi * pi));
  EXPECT_NEAR(sobolev_norm(final_field.field, 1), exact, 1e-6);
  EXPECT_EQ(std::distance(fs::directory_iterator(path("out/snapshots")), fs::directory_iterator{}), 5);
}

TEST_F(Cli, SkeletonRerunIsByteIdentical) {
  auto cfg = write("noisy.json", kNoisy);
  ASSERT_EQ(run("skeleton --config " + cfg + " --out " + path("a")).code, 0);
  ASSERT_EQ(run("skeleton --config " + cfg + " --out " + path("b")).code, 0);
  EXPECT_TRUE(same_tree(path("a"), path("b")));
  // The written config reproduces the run.
  ASSERT_EQ(run("skeleton --config " + path("a/config.json") + " --out " + path("c")).code, 0);
  EXPECT_TRUE(same_tree(path("a"), path("c")));
  auto manifest = parse_json(read_file(path("a/manifest.json")), "manifest");
  EXPECT_EQ(manifest["command"], "skeleton");
  EXPECT_EQ(manifest["outputs"]["energy.csv"], git_blob_sha1(read_file(path("a/energy.csv"))));
}

TEST_F(Cli, SimulateEnsembleReproducibleAcrossThreads) {
  auto cfg = write("noisy.json", kNoisy);
  ASSERT_EQ(run("simulate --config " + cfg + " --out " + path("t1") + " --threads 1").code, 0);
  ASSERT_EQ(run("simulate --config " + cfg + " --out " + path("t3") + " --threads 3").code, 0);
  EXPECT_TRUE(same_tree(path("t1"), path("t3")));
  ASSERT_EQ(run("controlled --config " + cfg + " --out " + path("c1") + " --threads 1").code, 0);
  ASSERT_EQ(run("controlled --config " + cfg + " --out " + path("c3") + " --threads 3").code, 0);
  EXPECT_TRUE(same_tree(path("c1"), path("c3")));
  auto other = run("simulate --config " + cfg + " --out " + path("s2") + " --seed 12");
  ASSERT_EQ(other.code, 0);
  EXPECT_NE(read_file(path("t1/summary.json")), read_file(path("s2/summary.json")));
}

TEST_F(Cli, SimulateZeroNoiseCollapses) {
  auto cfg = write("quiet.json", R"({
    "problem": {"grid": 8, "u0": {"preset": "random", "decay": 2.0, "scale": 1.0, "seed": 3}},
    "noise": {"marks": [1.0]},
    "solver": {"dt": 0.01, "T": 0.1, "eps": 0.1},
    "experiment": {"replicas": 4}
  })");
  ASSERT_EQ(run("simulate --config " + cfg + " --out " + path("out")).code, 0);
  auto summary = parse_json(read_file(path("out/summary.json")), "summary");
  EXPECT_EQ(summary["sup_h1_sq"]["std_error"].get<double>(), 0.0);
  EXPECT_EQ(summary["jump_count"]["max"].get<double>(), 0.0);
  const std::string first = read_file(path("out/replicas/00000/final.sfld"));
  for (int r = 1; r < 4; ++r) EXPECT_EQ(read_file(path("out/replicas/0000" + std::to_string(r) + "/final.sfld")), first);
}

TEST_F(Cli, SimulateEventCountMatchesPoissonMean) {
  auto cfg = write("count.json", R"({
    "problem": {"grid": 4},
    "noise": {"marks": [1.0, 0.5], "scales": [0.1, 0.1]},
    "solver": {"dt": 0.05, "T": 0.5, "eps": 0.1},
    "experiment": {"replicas": 400, "write_replicas": false},
    "seed": 5
  })");
  ASSERT_EQ(run("simulate --config " + cfg + " --out " + path("out")).code, 0);
  auto summary = parse_json(read_file(path("out/summary.json")), "summary");
  const double expected = 1.5 * 0.5 / 0.1;
  EXPECT_EQ(summary["expected_event_count"].get<double>(), expected);
  const double mean = summary["event_count"]["mean"].get<double>();
  EXPECT_LT(std::abs(mean - expected), 3.0 * std::sqrt(expected / 400.0));
  EXPECT_FALSE(fs::exists(path("out/replicas")));
}

TEST_F(Cli, RejectedConfigWritesNothing) {
  auto zero = write("zero_replicas.json", R"({"noise": {"marks": [1.0]}, "experiment": {"replicas": 0}})");
  auto r = run("simulate --config " + zero + " --out " + path("out"));
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(path("out")));
  auto typo = write("typo.json", R"({"solver": {"dt": 0.01, "horizon": 0.1}})");
  EXPECT_EQ(run("skeleton --config " + typo + " --out " + path("out")).code, 2);
  auto steps = write("steps.json", R"({"control": {"time_grid": [0, 1], "marks": 1, "values": [1]},
                                      "solver": {"dt": 0.3, "T": 1.0}})");
  EXPECT_EQ(run("skeleton --config " + steps + " --out " + path("out")).code, 2);
  EXPECT_FALSE(fs::exists(path("out")));
}

TEST_F(Cli, SweepEpsWritesReport) {
  auto cfg = write("noisy.json", kNoisy);
  auto r = run("sweep-eps --config " + cfg + " --out " + path("out"));
  EXPECT_TRUE(r.code == 0 || r.code == 4) << r.out;
  auto report = parse_json(read_file(path("out/report.json")), "report");
  EXPECT_EQ(report["ladder"].size(), 2u);
  EXPECT_EQ(report["passed"].get<bool>(), r.code == 0);
  auto quiet = write("quiet.json", R"({
    "noise": {"marks": [1.0]}, "problem": {"grid": 8, "u0": {"preset": "shear", "a": 0.5}},
    "control": {"time_grid": [0, 0.1], "marks": 1, "values": [2]},
    "solver": {"dt": 0.01, "T": 0.1}, "experiment": {"replicas": 2}
  })");
  ASSERT_EQ(run("sweep-eps --config " + quiet + " --out " + path("quiet")).code, 0);
  auto q = parse_json(read_file(path("quiet/report.json")), "report");
  for (auto& e : q["errors"]) EXPECT_EQ(e.get<double>(), 0.0);
}

TEST_F(Cli, VerifySelectors) {
  auto skew = run("verify skew --out " + path("skew"));
  EXPECT_EQ(skew.code, 0) << skew.out;
  EXPECT_NE(skew.out.find("PASS skew"), std::string::npos);
  auto cfg = write("tiny.json", R"({"problem": {"grid": 8}, "noise": {"marks": [1.0, 0.5]},
                                    "experiment": {"trials": 5, "statistical_replicas": 1000}, "seed": 2})");
  auto all = run("verify all --config " + cfg + " --out " + path("all"));
  EXPECT_EQ(all.code, 0) << all.out;
  for (const char* name : {"skew", "leray", "taming", "energy-h0", "energy-h1", "monotone-h0", "monotone-h1",
                           "isometry-constant", "thinning", "cost"})
    EXPECT_NE(all.out.find(std::string("PASS ") + name), std::string::npos) << name;
  EXPECT_TRUE(fs::exists(path("all/reports.json")));
  EXPECT_TRUE(fs::exists(path("all/summary.csv")));
}
