#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::path(SWARMLAW_TEST_WORKDIR) / "cli";

int run(const std::string& args) {
  const std::string cmd = std::string(SWARMLAW_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Drops the `# swarmlaw ...` provenance header.
std::string body(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line, out;
  while (std::getline(in, line)) {
    if (!line.starts_with("#")) out += line + "\n";
  }
  return out;
}

std::string path(const std::string& name) { return (kWork / name).string(); }

void write(const std::string& name, const std::string& text) { std::ofstream(kWork / name) << text; }

struct Fixture {
  Fixture() {
    fs::create_directories(kWork);
    write("harmonic.json", R"({"schema_version": 1, "f": [[-0.00625, 1.0]], "g": [[0.0, 0.0]],
      "cutoff_radius": null, "pattern_meta": {"kind": "ring", "targets": {"R": 4.0}}})");
  }
};

const Fixture fixture;

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run("") == 2);
  CHECK(run("train --pattern clumps -R 4 -o " + path("x.json")) == 2);
  CHECK(run("train --pattern spiral -o " + path("x.json")) == 2);
  CHECK(run("simulate -m " + path("harmonic.json") + " --agents 1 -o " + path("t.csv")) == 2);
  CHECK(run("simulate -m " + path("missing.json") + " -o " + path("t.csv")) == 2);
  CHECK(run("simulate -m " + path("harmonic.json") + " --max-step 0.05 -o " + path("t.csv")) == 2);
}

TEST_CASE("simulate is byte-identical for a fixed seed") {
  const std::string common = "simulate -m " + path("harmonic.json") + " --seed 5 --duration 5 ";
  REQUIRE(run(common + "-o " + path("a.csv") + " --metrics " + path("am.csv")) == 0);
  REQUIRE(run(common + "-o " + path("b.csv") + " --metrics " + path("bm.csv")) == 0);
  CHECK(slurp(path("a.csv")) == slurp(path("b.csv")));
  CHECK(slurp(path("am.csv")) == slurp(path("bm.csv")));
  REQUIRE(run("simulate -m " + path("harmonic.json") + " --seed 6 --duration 5 -o " + path("c.csv")) == 0);
  CHECK(body(path("a.csv")) != body(path("c.csv")));
}

TEST_CASE("metrics recomputed from a trajectory match simulate") {
  REQUIRE(run("simulate -m " + path("harmonic.json") + " --seed 2 --duration 5 -o " + path("m.csv") +
              " --metrics " + path("m_metrics.csv")) == 0);
  REQUIRE(run("metrics " + path("m.csv") + " -o " + path("m_re.csv")) == 0);
  CHECK(body(path("m_metrics.csv")) == body(path("m_re.csv")));
  CHECK(body(path("m_re.csv")).starts_with("t,O,Or,Orabs,mean_radius,radius_std,max_extent,min_dist\n"));
}

TEST_CASE("single-segment scenario reproduces simulate") {
  write("one.json", R"({"schema_version": 1, "n_agents": 40, "duration": 5, "seed": 9,
    "groups": [{"agents": [1, 40]}],
    "segments": [{"t_start": 0, "models": ["harmonic.json"]}],
    "outputs": {"trajectory": "one_traj.csv"}})");
  REQUIRE(run("scenario " + path("one.json")) == 0);
  REQUIRE(run("simulate -m " + path("harmonic.json") + " --seed 9 --duration 5 -o " + path("s9.csv")) == 0);
  CHECK(body(path("one_traj.csv")) == body(path("s9.csv")));
  write("bad.json", R"({"schema_version": 1, "n_agents": 40, "duration": 5,
    "groups": [{"agents": [1, 30]}], "segments": [{"t_start": 0, "models": ["harmonic.json"]}]})");
  CHECK(run("scenario " + path("bad.json")) == 2);
  write("future.json", R"({"schema_version": 7})");
  CHECK(run("scenario " + path("future.json")) == 2);
}

TEST_CASE("trials output does not depend on the thread count") {
  const std::string common = "trials -m " + path("harmonic.json") + " --trials 4 --seed 3 --duration 5 ";
  REQUIRE(run(common + "--threads 1 -o " + path("t1.json")) == 0);
  REQUIRE(run(common + "--threads 3 -o " + path("t3.json")) == 0);
  CHECK(slurp(path("t1.json")) == slurp(path("t3.json")));
}

TEST_CASE("train is reproducible and writes a report") {
  const std::string common =
      "train --pattern ring -R 4 --seed 4 --agents 4 --time-points 20 --adam-epochs 5 --max-iter 5 --restarts 2 ";
  const int a = run(common + "-o " + path("r1.json"));
  const int b = run(common + "-o " + path("r2.json"));
  CHECK((a == 0 || a == 4));
  CHECK(a == b);
  CHECK(slurp(path("r1.json")) == slurp(path("r2.json")));
  CHECK(body(path("r1.json.report.json")) == body(path("r2.json.report.json")));
  CHECK(body(path("r1.json.report.json")).find("\"restart_losses\"") != std::string::npos);
}
