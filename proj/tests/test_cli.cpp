#include "powerprint/eval.hpp"
#include "powerprint/trace.hpp"

#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace powerprint;

namespace {

const char* const kProfiles = R"(# powerprint-profiles v1
[profile low]
family=low-flat
idle_baseline_amps=10
jitter_std_amps=0.5
duration_seconds=40,44
[phase P]
mean_amps=5
duration_seconds=40
periodic=1:2

[profile mid]
family=low-patterned
idle_baseline_amps=10
jitter_std_amps=0.5
duration_seconds=40,44
[phase P]
mean_amps=5
duration_seconds=40
periodic=9:3

[profile high]
family=high-draw
idle_baseline_amps=10
jitter_std_amps=0.5
duration_seconds=40,44
[phase P]
mean_amps=30
duration_seconds=40
periodic=31:8
)";

/// Scratch directory removed at scope exit.
struct Scratch {
  fs::path root;
  Scratch() {
    root = fs::temp_directory_path() / ("powerprint-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    fs::remove_all(root);
    fs::create_directories(root);
    std::ofstream(root / "profiles.txt") << kProfiles;
  }
  ~Scratch() { fs::remove_all(root); }
  static int& counter() {
    static int n = 0;
    return n;
  }
  std::string operator/(const std::string& p) const { return (root / p).string(); }
};

int run(const std::string& args) {
  const std::string cmd = std::string(POWERPRINT_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Every regular file under `dir`, relative path -> bytes.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

}  // namespace

TEST_CASE("synth reruns are byte-identical") {
  Scratch s;
  const std::string common = "synth --profiles " + (s / "profiles.txt") + " --n 3 --noise-level 2";
  REQUIRE(run("--seed 9 --out " + (s / "a") + " " + common) == 0);
  REQUIRE(run("--seed 9 --out " + (s / "b") + " " + common) == 0);
  REQUIRE(run("--seed 10 --out " + (s / "c") + " " + common) == 0);
  const auto a = tree(s / "a");
  CHECK(a == tree(s / "b"));
  CHECK(a != tree(s / "c"));
  CHECK(a.count("manifest.csv"));
  CHECK(a.count("manifest_noise2.csv"));
  CHECK(a.count("recipes_noise2.txt"));
  CHECK(a.count("traces/high-002.csv"));
  CHECK(a.at("manifest.csv").find("# seed=9") != std::string::npos);
  CHECK(a.at("run_config.txt").find("seed=9") != std::string::npos);
  const auto m = load_manifest(s / "a/manifest.csv");
  CHECK(m.size() == 9);
  CHECK(m.labels() == std::vector<std::string>{"low", "mid", "high"});
}

TEST_CASE("synth with n=0 writes an empty manifest") {
  Scratch s;
  REQUIRE(run("--out " + (s / "z") + " synth --n 0 --profiles " + (s / "profiles.txt")) == 0);
  CHECK(load_manifest(s / "z/manifest.csv").empty());
}

TEST_CASE("train, classify and their exit codes") {
  Scratch s;
  REQUIRE(run("--seed 4 --out " + (s / "data") + " synth --n 4 --profiles " + (s / "profiles.txt")) == 0);
  const std::string manifest = s / "data/manifest.csv";
  REQUIRE(run("--seed 4 --out " + (s / "m1") + " train " + manifest) == 0);
  REQUIRE(run("--seed 4 --out " + (s / "m2") + " train " + manifest + " --export-features " + (s / "m2/f.csv")) == 0);
  CHECK(slurp(s / "m1/model.txt") == slurp(s / "m2/model.txt"));
  CHECK(fs::file_size(s / "m2/f.csv") > 0);
  CHECK(slurp(s / "m1/fit_report.txt").find("labels=low,mid,high") != std::string::npos);

  const std::string model = s / "m1/model.txt";
  CHECK(run("--out " + (s / "c") + " classify " + model + " " + manifest) == 0);
  const auto report = slurp(s / "c/predictions.csv");
  std::istringstream lines(report);
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("sample_id", 0) == 0) continue;
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    const auto c = line.find(',', b + 1);
    CHECK(line.substr(a + 1, b - a - 1) == line.substr(b + 1, c - b - 1));
    ++rows;
  }
  CHECK(rows == 12);

  CHECK(run("--out " + (s / "c") + " classify " + model + " " + manifest + " --threshold 1.1") == 3);

  save_trace(PowerTrace(Eigen::VectorXd::Constant(1440, 12.0)), s / "short.csv");
  CHECK(run("--out " + (s / "c") + " classify " + model + " " + (s / "short.csv") + " --report " + (s / "c/short.csv")) == 2);
  CHECK(slurp(s / "c/short.csv").find("short,unknown,error:too-short,0,0") != std::string::npos);
  save_trace(PowerTrace(load_manifest(manifest)[10].trace), s / "single.csv");
  CHECK(run("--out " + (s / "c") + " classify " + model + " " + (s / "single.csv") + " --report " + (s / "c/one.csv")) == 0);
  CHECK(slurp(s / "c/one.csv").find("single,unknown,high,") != std::string::npos);
}

TEST_CASE("training on one label fails") {
  Scratch s;
  std::ofstream(s / "one.txt") << "# powerprint-profiles v1\n[profile solo]\nidle_baseline_amps=1\n"
                                  "duration_seconds=40,40\n[phase P]\nmean_amps=1\nduration_seconds=40\n";
  REQUIRE(run("--out " + (s / "d") + " synth --n 3 --profiles " + (s / "one.txt")) == 0);
  CHECK(run("--out " + (s / "m") + " train " + (s / "d/manifest.csv")) == 2);
}

TEST_CASE("usage and data errors") {
  Scratch s;
  CHECK(run("") == 1);
  CHECK(run("bogus") == 1);
  CHECK(run("train") == 1);
  CHECK(run("--seed notanumber synth") == 1);
  CHECK(run("--out " + (s / "e") + " evaluate " + (s / "nothing.csv")) == 2);
  CHECK(run("--out " + (s / "e") + " synth --profiles " + (s / "nothing.txt")) == 2);
  REQUIRE(run("--out " + (s / "d") + " synth --n 2 --profiles " + (s / "profiles.txt")) == 0);
  CHECK(run("--out " + (s / "e") + " evaluate " + (s / "d/manifest.csv") + " --levels 3..1") == 1);
  CHECK(run("--out " + (s / "e") + " evaluate " + (s / "d/manifest.csv") + " --folds 1") == 1);
  CHECK(run("--out " + (s / "e") + " classify " + (s / "d/manifest.csv") + " " + (s / "d/manifest.csv")) == 2);
}

TEST_CASE("evaluate reruns are byte-identical and reports are self-consistent") {
  Scratch s;
  REQUIRE(run("--seed 2 --out " + (s / "data") + " synth --n 4 --profiles " + (s / "profiles.txt")) == 0);
  const std::string args = " evaluate " + (s / "data/manifest.csv") + " --folds 2 --trials 2 --levels 0,1 --random-draws 2000";
  REQUIRE(run("--seed 2 --out " + (s / "e1") + args) == 0);
  REQUIRE(run("--seed 2 --out " + (s / "e2") + args) == 0);
  const auto a = tree(s / "e1");
  CHECK(a == tree(s / "e2"));
  CHECK(a.count("report_level0.txt"));
  CHECK(a.count("report_level1.txt"));
  CHECK(a.count("summary_level1.txt"));
  CHECK(a.at("curves.csv").rfind("# seed=2 folds=2 trials=2\nlevel,accuracy,random,mi\n", 0) == 0);
  for (const char* name : {"report_level0.txt", "report_level1.txt"}) {
    std::istringstream in(a.at(name));
    const auto r = read_report(in);
    for (std::size_t k = 0; k < r.labels.size(); ++k) {
      const auto m = precision_recall_f(r.confusion, k);
      CHECK(std::abs(m.precision - r.per_label[k].precision) <= 1e-12);
      CHECK(std::abs(m.recall - r.per_label[k].recall) <= 1e-12);
      CHECK(std::abs(m.f_score - r.per_label[k].f_score) <= 1e-12);
    }
  }

  REQUIRE(run("--seed 2 --out " + (s / "clean") + " evaluate " + (s / "data/manifest.csv") + " --folds 2 --levels 0 --random-draws 100") == 0);
  CHECK(fs::exists(s / "clean/report_level0.txt"));
  CHECK_FALSE(fs::exists(s / "clean/report_level1.txt"));

  REQUIRE(run("--seed 2 --out " + (s / "sw") + " noise-sweep " + (s / "data/manifest.csv") + " --folds 2 --trials 2 --levels 0,1 --random-draws 2000") == 0);
  CHECK(slurp(s / "sw/curves.csv") == a.at("curves.csv"));
  CHECK_FALSE(fs::exists(s / "sw/report_level0.txt"));
}
