#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string err;
};

fs::path Scratch() {
  const fs::path dir = fs::temp_directory_path() / "nnquad_cli_test";
  fs::create_directories(dir);
  return dir;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliRun Cli(const std::string& args) {
  const fs::path err = Scratch() / "stderr.txt";
  const std::string cmd = std::string(NNQUAD_CLI) + " " + args + " > /dev/null 2> " + err.string();
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = Slurp(err);
  return r;
}

void WriteFile(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

// Hover desired trajectory, `n` rows at spacing dt.
fs::path HoverCsv(const std::string& name, int n, double dt) {
  std::ostringstream os;
  os << "t,x,y,z,vx,vy,vz,phi,theta,psi,wx,wy,wz\n";
  for (int k = 0; k < n; ++k) os << k * dt << ",0,0,0,0,0,0,0,0,0,0,0,0\n";
  const fs::path p = Scratch() / name;
  WriteFile(p, os.str());
  return p;
}

}  // namespace

TEST(Cli, NoSubcommandIsUsageError) { EXPECT_EQ(Cli("").code, 1); }

TEST(Cli, EmptySuiteFails) {
  const fs::path cfg = Scratch() / "empty.ini";
  WriteFile(cfg, "[collect]\ncorpus_seconds = 0\n");
  const CliRun r = Cli("collect --config " + cfg.string() + " --out " + (Scratch() / "c").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("no maneuvers"), std::string::npos);
}

TEST(Cli, BadKeyNamesTheKey) {
  const fs::path cfg = Scratch() / "bad.ini";
  WriteFile(cfg, "[plant]\nmasss = 0.03\n");
  const CliRun r = Cli("task --config " + cfg.string() + " --out " + (Scratch() / "t.csv").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("masss"), std::string::npos);
}

TEST(Cli, MissingFilesAreUsageErrors) {
  EXPECT_EQ(Cli("task --config /nonexistent.ini").code, 1);
  EXPECT_EQ(Cli("train --data /nonexistent/dir --out " + (Scratch() / "tr").string()).code, 1);
  EXPECT_EQ(Cli("plan --ground-truth --desired /nonexistent.csv").code, 1);
}

TEST(Cli, PlanNeedsModelsOrGroundTruth) {
  EXPECT_EQ(Cli("plan --desired " + HoverCsv("h.csv", 20, 0.01).string()).code, 1);
}

TEST(Cli, PlanDtMismatch) {
  const CliRun r = Cli("plan --ground-truth --desired " + HoverCsv("slow.csv", 20, 0.02).string() + " --out " +
                    (Scratch() / "p_bad").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("dt"), std::string::npos);
}

TEST(Cli, HoverPlanFlyEval) {
  const fs::path desired = HoverCsv("hover.csv", 51, 0.01);
  const fs::path plan = Scratch() / "p_hover";
  ASSERT_EQ(Cli("plan --ground-truth --desired " + desired.string() + " --out " + plan.string()).code, 0);
  ASSERT_TRUE(fs::exists(plan / "plan.csv"));
  const fs::path quiet = Scratch() / "quiet.ini";
  WriteFile(quiet, "[noise]\nthrust_std = 0\ntorque_std = 0\n");
  const fs::path fly = Scratch() / "f_hover";
  ASSERT_EQ(Cli("fly --mode nn_model --config " + quiet.string() + " --trajectory " + (plan / "plan.csv").string() +
                " --out " + fly.string())
                .code,
            0);
  ASSERT_TRUE(fs::exists(fly / "flight_log.csv"));
  const fs::path ev = Scratch() / "e_hover";
  ASSERT_EQ(Cli("eval --log " + (fly / "flight_log.csv").string() + " --desired " + desired.string() + " --out " +
                ev.string())
                .code,
            0);
  const std::string summary = Slurp(ev / "eval_error_summary.txt");
  EXPECT_NE(summary.find("rms_position=0\n"), std::string::npos) << summary;
}

TEST(Cli, FlyNnModelNeedsInputs) {
  const CliRun r = Cli("fly --mode nn_model --trajectory " + HoverCsv("noinputs.csv", 20, 0.01).string() + " --out " +
                    (Scratch() / "f_bad").string());
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, TaskIsDeterministic) {
  const fs::path a = Scratch() / "task_a.csv", b = Scratch() / "task_b.csv";
  ASSERT_EQ(Cli("task --out " + a.string()).code, 0);
  ASSERT_EQ(Cli("task --out " + b.string()).code, 0);
  EXPECT_EQ(Slurp(a), Slurp(b));
  EXPECT_EQ(Slurp(a).rfind("t,x,y,z", 0), 0u);
}
