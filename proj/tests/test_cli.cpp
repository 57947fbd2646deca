#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string output;
};

Result dvbsim(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "dvbsim_test.log";
  const std::string cmd = std::string(DVBSIM_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream is(log);
  std::stringstream ss;
  ss << is.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("dvbsim_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "small.json") << R"({
      "seed": 3,
      "network": {"nodes": 6, "side": 1.5, "radius": 0.8},
      "data": {"points_per_node": 30},
      "max_iters": 15,
      "algorithms": [{"kind": "dsvb"}, {"kind": "dvb_admm"}],
      "out": "unused"
    })";
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string cfg() const { return "--config " + (dir_ / "small.json").string(); }
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, MissingConfigExitsTwoAndNamesPath) {
  const Result r = dvbsim("run --config /no/such/config.json");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("/no/such/config.json"), std::string::npos);
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(dvbsim("").code, 2);
  EXPECT_EQ(dvbsim("frobnicate").code, 2);
  EXPECT_EQ(dvbsim("run --trials 0 " + cfg()).code, 2);
  EXPECT_EQ(dvbsim("run --algo gibbs " + cfg()).code, 2);
  std::ofstream(dir_ / "broken.json") << "{ not json";
  EXPECT_EQ(dvbsim("run --config " + (dir_ / "broken.json").string()).code, 2);
  std::ofstream(dir_ / "typo.json") << R"({"algorithms": [{"kind": "cvb"}], "nodes": 5})";
  const Result r = dvbsim("run --config " + (dir_ / "typo.json").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("nodes"), std::string::npos);
}

TEST_F(Cli, RuntimeErrorsExitOne) {
  std::ofstream(dir_ / "csv.json") << R"({"data": {"source": "csv", "csv": "missing.csv"},
    "algorithms": [{"kind": "cvb"}]})";
  EXPECT_EQ(dvbsim("run --config " + (dir_ / "csv.json").string() + " --out " + (dir_ / "o").string()).code, 1);
}

TEST_F(Cli, RunWritesTraceAndFinalState) {
  const fs::path out = dir_ / "run";
  const Result r = dvbsim("run " + cfg() + " --out " + out.string() + " --algo dvb_admm");
  ASSERT_EQ(r.code, 0) << r.output;
  const std::string trace = slurp(out / "trace.csv");
  EXPECT_EQ(trace.rfind("iter,algo,mean_kl,std_kl,consensus_disagreement,elapsed_ms\n", 0), 0u);
  EXPECT_NE(trace.find("\n15,dvb_admm,"), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "final_state.csv"));
  EXPECT_TRUE(fs::exists(out / "summary.csv"));

  const Result e = dvbsim("eval " + cfg() + " --out " + out.string());
  ASSERT_EQ(e.code, 0) << e.output;
  EXPECT_NE(slurp(out / "eval.csv").find("dvb_admm,"), std::string::npos);
}

TEST_F(Cli, SameSeedGivesIdenticalTraces) {
  const fs::path a = dir_ / "a", b = dir_ / "b", c = dir_ / "c";
  ASSERT_EQ(dvbsim("compare --seed 7 " + cfg() + " --out " + a.string()).code, 0);
  ASSERT_EQ(dvbsim("compare --seed 7 " + cfg() + " --out " + b.string()).code, 0);
  ASSERT_EQ(dvbsim("compare --seed 8 " + cfg() + " --out " + c.string()).code, 0);
  EXPECT_EQ(slurp(a / "trace.csv"), slurp(b / "trace.csv"));
  EXPECT_EQ(slurp(a / "final_state.csv"), slurp(b / "final_state.csv"));
  EXPECT_NE(slurp(a / "trace.csv"), slurp(c / "trace.csv"));
}

TEST_F(Cli, TrialsAndGenerators) {
  const fs::path out = dir_ / "t";
  ASSERT_EQ(dvbsim("run --trials 2 --max-iters 3 " + cfg() + " --out " + out.string()).code, 0);
  EXPECT_TRUE(fs::exists(out / "trial_0" / "trace.csv"));
  EXPECT_TRUE(fs::exists(out / "trial_1" / "trace.csv"));
  const std::string summary = slurp(out / "summary.csv");
  EXPECT_NE(summary.find("\n1,dsvb,3,"), std::string::npos);

  ASSERT_EQ(dvbsim("gen-net " + cfg() + " --out " + out.string()).code, 0);
  EXPECT_EQ(slurp(out / "network.txt").rfind("# nodes 6\n", 0), 0u);
  ASSERT_EQ(dvbsim("gen-data " + cfg() + " --out " + out.string()).code, 0);
  EXPECT_EQ(slurp(out / "data.csv").rfind("x0,x1,label,node\n", 0), 0u);
}
