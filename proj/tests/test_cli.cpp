#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kBinary = FOMADS_CLI_PATH;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fomads_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Runs the CLI inside the scratch directory; returns its exit status.
  int run(const std::string& args, const std::string& env = "") const {
    const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" + kBinary.string() + "' " + args +
                            " > out.txt 2> err.txt";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  }

  std::string read(const std::string& name) const {
    std::ifstream in(dir_ / name);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenerateCountsAndDeterminism) {
  ASSERT_EQ(run("generate --out a.csv --n-per-fault 50"), 0);
  ASSERT_EQ(run("generate --out b.csv --n-per-fault 50"), 0);
  const auto a = read("a.csv");
  EXPECT_EQ(a, read("b.csv"));
  // 800 normal + 24 * 50 fault windows, 400 samples each, plus the header.
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 2000 * 400 + 1);
}

TEST_F(Cli, SeedFlagAndEnvironmentFallback) {
  ASSERT_EQ(run("generate --out a.csv --n-normal 2 --n-per-fault 0 --seed 9"), 0);
  ASSERT_EQ(run("generate --out b.csv --n-normal 2 --n-per-fault 0", "FOMADS_SEED=9"), 0);
  ASSERT_EQ(run("generate --out c.csv --n-normal 2 --n-per-fault 0", "FOMADS_SEED=10"), 0);
  EXPECT_EQ(read("a.csv"), read("b.csv"));
  EXPECT_NE(read("a.csv"), read("c.csv"));
  EXPECT_EQ(run("generate --out d.csv", "FOMADS_SEED=x1"), 2);
}

TEST_F(Cli, TrainEvalRoundTrip) {
  ASSERT_EQ(run("generate --out tr.csv --test-out te.csv --n-normal 20 --n-per-fault 2"), 0);
  ASSERT_EQ(run("attack --dataset te.csv --kind bias --out te_bias.csv"), 0);
  ASSERT_EQ(run("train --dataset tr.csv --out-dir m --stages normal,bias --set train.epochs_per_stage=1"), 0);
  for (const char* f : {"m/model.txt", "m/normalizer.txt", "m/features.cfg", "m/metrics.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / f)) << f;
  }
  EXPECT_EQ(read("m/metrics.csv").substr(0, 6), "stage,");

  ASSERT_EQ(run("eval --model-dir m --dataset te.csv --report r.csv --confusion c.csv"), 0);
  const auto table = read("out.txt");
  EXPECT_NE(table.find("Normal"), std::string::npos);
  EXPECT_NE(table.find("Replay"), std::string::npos);
  EXPECT_EQ(read("r.csv").substr(0, 10), "condition,");
  ASSERT_EQ(run("eval --model-dir m --dataset te.csv --report r2.csv"), 0);
  EXPECT_EQ(read("r.csv"), read("r2.csv"));

  ASSERT_EQ(run("eval --model-dir m --condition-data bias=te_bias.csv --report r3.csv"), 0);
  EXPECT_NE(read("r3.csv").find("\nbias,"), std::string::npos);
}

TEST_F(Cli, AblationFlagsChangeTheModel) {
  ASSERT_EQ(run("generate --out tr.csv --n-normal 12 --n-per-fault 1"), 0);
  const std::string base = "train --dataset tr.csv --stages normal --set train.epochs_per_stage=1 ";
  ASSERT_EQ(run(base + "--out-dir raw --no-frac-features"), 0);
  EXPECT_NE(read("raw/features.cfg").find("feat.fractional = false"), std::string::npos);
  EXPECT_NE(read("raw/normalizer.txt").find("schema_id 2"), std::string::npos);
  ASSERT_EQ(run(base + "--out-dir flat --flat"), 0);
  EXPECT_NE(read("flat/model.txt").find("mode flat"), std::string::npos);
  ASSERT_EQ(run(base + "--out-dir plain --no-ohem"), 0);
  ASSERT_EQ(run("extract --dataset tr.csv --out f.csv --no-frac-features"), 0);
  EXPECT_EQ(read("f.csv").substr(0, 20), "window_id,f_0,f_1,f_");
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("train --out-dir m --set train.bogus=1"), 2);
  EXPECT_EQ(run("train --out-dir m --stages bias,normal"), 2);
  EXPECT_EQ(run("attack --dataset missing.csv --kind bias --out x.csv"), 3);
  EXPECT_EQ(run("eval --model-dir nowhere --dataset missing.csv"), 3);
  EXPECT_EQ(run("sweep --lengths 5000 --alphas 0.7"), 2);
  {
    std::ofstream bad(dir_ / "bad.csv");
    bad << "window_id,sample_idx,V,P,Q,class_id,attack_kind\n0,0,1,2\n";
  }
  EXPECT_EQ(run("extract --dataset bad.csv --out f.csv"), 3);
  // A learning rate this large drives the loss to overflow.
  ASSERT_EQ(run("generate --out tr.csv --n-normal 12 --n-per-fault 1"), 0);
  EXPECT_EQ(run("train --dataset tr.csv --out-dir m --stages normal --set train.learn_rate=1e307"), 4);
}

TEST_F(Cli, SweepSingleCell) {
  ASSERT_EQ(run("sweep --out s.csv --alphas 0.7 --lengths 200 --epochs 1 --threads 1 "
                "--set data.n_normal=10 --set data.n_per_fault=1"),
            0);
  const auto s = read("s.csv");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 2);
  EXPECT_EQ(s.substr(0, 24), "alpha,L,val_acc\n0.7,200,");
}
