// Drives the built command-line tool end to end.
#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>

#include "support.hpp"

using namespace testkit;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string output; // stdout and stderr
};

Run run(const std::string &args, const std::string &env = {}) {
  const std::string cmd = env + (env.empty() ? "" : " ") + OVERLAYFORGE_CLI + std::string(" ") + args + " 2>&1";
  Run r;
  FILE *p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, n);
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string bench(const std::string &name) { return source_dir() + "/benchmarks/" + name + ".ir"; }

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("overlayforge-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + "-" +
           std::to_string(getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string out(const std::string &sub = "out") const { return (dir / sub).string(); }

  fs::path dir;
};

std::map<std::string, std::string> snapshot(const fs::path &root) {
  std::map<std::string, std::string> files;
  for (const auto &e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() != "timing.json")
      files[fs::relative(e.path(), root).string()] = read_text(e.path());
  return files;
}

} // namespace

TEST_F(Cli, MineMatmul) {
  const auto r = run("mine " + bench("matmul") + " --out " + out());
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_NE(r.output.find("matmul k0 support=2 inputs=3 outputs=1"), std::string::npos) << r.output;
  EXPECT_TRUE(fs::exists(dir / "out/matmul/kernels.json"));
  EXPECT_TRUE(fs::exists(dir / "out/matmul/k0.dfg"));
  EXPECT_TRUE(fs::exists(dir / "out/matmul/matmul.hw.ir"));
  const auto hw = ir::parse_ir(read_text(dir / "out/matmul/matmul.hw.ir"));
  EXPECT_NE(ir::print_ir(hw).find("hwcall k0("), std::string::npos);
  const auto k0 = graph::read_dfg(read_text(dir / "out/matmul/k0.dfg"));
  EXPECT_EQ(k0.size(), 2u);
}

TEST_F(Cli, EmptyDirectoryIsNoInput) {
  fs::create_directories(dir / "empty");
  const auto r = run("mine " + out("empty") + " --out " + out());
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("no input"), std::string::npos) << r.output;
}

TEST_F(Cli, BadArgumentsRejected) {
  EXPECT_NE(run("mine " + bench("matmul") + " --min-support 0").status, 0);
  EXPECT_NE(run("stitch --flavor fast").status, 0);
  EXPECT_NE(run("").status, 0);
  EXPECT_NE(run("mine /nonexistent.ir --out " + out()).status, 0);
}

TEST_F(Cli, MissingLibraryIsAnError) {
  ASSERT_EQ(run("mine " + bench("matmul") + " --out " + out()).status, 0);
  const auto r = run("generate --out " + out() + " --lib " + out("nolib.json"));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("nolib.json"), std::string::npos) << r.output;
}

TEST_F(Cli, GenerateReportsLatency) {
  ASSERT_EQ(run("mine " + bench("matmul") + " --out " + out()).status, 0);
  const auto r = run("generate --out " + out() + " --lib " + source_dir() + "/data/default_library.json");
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_NE(r.output.find("matmul k0 latency=7"), std::string::npos) << r.output;
  const auto n = stitch::parse_netlist(read_text(dir / "out/matmul/k0.netlist.json"));
  EXPECT_EQ(n.latency, 7u);
  EXPECT_EQ(n.resources.dsp, 4u);
}

TEST_F(Cli, StitchAndSimulate) {
  ASSERT_EQ(run("mine " + bench("outer") + " --out " + out()).status, 0);
  ASSERT_EQ(run("generate --out " + out()).status, 0);
  const auto net = out("out/outer/k0.netlist.json");
  auto r = run("stitch " + net + " --grid 3x3 --replicate --out " + out());
  ASSERT_EQ(r.status, 0) << r.output;
  const auto o = stitch::parse_overlay(read_text(dir / "out/overlay.json"));
  EXPECT_EQ(o.kernel.size(), 9u);
  EXPECT_NE(r.output.find("as "), std::string::npos);
  EXPECT_NE(r.output.find("alu "), std::string::npos);

  r = run("sim " + out("out/overlay.json") + " --out " + out() + " --vectors 32");
  EXPECT_EQ(r.status, 0) << r.output;
  EXPECT_TRUE(fs::exists(dir / "out/sim_report.json"));

  r = run("stitch " + net + " --grid 2x2 --flavor as --out " + out("one"));
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_EQ(r.output.find("alu "), std::string::npos) << r.output;
  EXPECT_EQ(stitch::parse_overlay(read_text(dir / "one/overlay.json")).kernel.size(), 1u);
  EXPECT_NE(run("stitch " + net + " --grid 3by3 --out " + out("bad")).status, 0);
}

TEST_F(Cli, SimWorkloadFiles) {
  ASSERT_EQ(run("mine " + bench("outer") + " --out " + out()).status, 0);
  ASSERT_EQ(run("generate --out " + out()).status, 0);
  ASSERT_EQ(run("stitch " + out("out/outer/k0.netlist.json") + " --grid 1x1 --out " + out()).status, 0);
  const auto overlay = out("out/overlay.json");
  {
    std::ofstream(dir / "w.csv") << "in0,in1\n3,4\n5,6\n";
    const auto r = run("sim " + overlay + " --workload " + out("w.csv") + " --out " + out());
    EXPECT_EQ(r.status, 0) << r.output;
  }
  {
    std::ofstream(dir / "empty.csv") << "in0,in1\n";
    const auto r = run("sim " + overlay + " --workload " + out("empty.csv") + " --out " + out());
    EXPECT_EQ(r.status, 0) << r.output;
  }
  {
    std::ofstream(dir / "bad.csv") << "in0,in1\n3\n";
    EXPECT_NE(run("sim " + overlay + " --workload " + out("bad.csv") + " --out " + out()).status, 0);
  }
  {
    std::ofstream(dir / "broken.json") << read_text(overlay).substr(0, 40);
    const auto r = run("sim " + out("broken.json") + " --out " + out());
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.output.find("error"), std::string::npos) << r.output;
  }
}

TEST_F(Cli, ReportTables) {
  ASSERT_EQ(run("mine " + source_dir() + "/benchmarks --out " + out()).status, 0);
  EXPECT_NE(run("report --out " + out()).status, 0); // no netlists yet
  ASSERT_EQ(run("generate --out " + out()).status, 0);
  const auto r = run("report --out " + out());
  ASSERT_EQ(r.status, 0) << r.output;
  for (const char *f : {"kernel_io.csv", "cycles.csv", "scaling.csv"}) EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  std::istringstream scaling(read_text(dir / "out/scaling.csv"));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(scaling, line)) rows += !line.empty();
  EXPECT_EQ(rows, 1u + 9); // header + grids 2x2 .. 10x10
  const auto t1 = read_text(dir / "out/kernel_io.csv");
  EXPECT_NE(t1.find("smooth,k0,10,1"), std::string::npos) << t1;
}

TEST_F(Cli, RerunsAreByteIdentical) {
  auto pipeline = [&](const std::string &o) {
    ASSERT_EQ(run("mine " + source_dir() + "/benchmarks --out " + o).status, 0);
    ASSERT_EQ(run("generate --out " + o).status, 0);
    ASSERT_EQ(run("stitch " + o + "/robert/k0.netlist.json --grid 2x2 --replicate --out " + o).status, 0);
    ASSERT_EQ(run("sim " + o + "/overlay.json --seed 9 --out " + o).status, 0);
    ASSERT_EQ(run("report --out " + o).status, 0);
  };
  pipeline(out("a"));
  pipeline(out("b"));
  const auto a = snapshot(dir / "a"), b = snapshot(dir / "b");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
  pipeline(out("a"));
  EXPECT_EQ(snapshot(dir / "a"), b);
}

TEST_F(Cli, LogLevelFromEnvironment) {
  const auto quiet = run("mine " + bench("robert") + " --out " + out(), "OVERLAYFORGE_LOG=error");
  const auto loud = run("mine " + bench("robert") + " --out " + out(), "OVERLAYFORGE_LOG=debug");
  EXPECT_EQ(quiet.status, 0);
  EXPECT_EQ(loud.status, 0);
  EXPECT_GT(loud.output.size(), quiet.output.size());
}
