#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int status = -1;
  std::string output;  // stdout and stderr together
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "pixelmpc_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir.parent_path());
  return dir;
}

RunResult run(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "pixelmpc_test_cli_output.txt";
  const std::string cmd = std::string("\"") + PIXELMPC_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string config(const std::string& name) {
  return "\"" + (fs::path(PIXELMPC_SOURCE_DIR) / "configs" / name).string() + "\"";
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

/// FNV-1a over the sorted relative paths and contents of every file below `dir`.
std::uint64_t tree_checksum(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir));
  }
  std::sort(files.begin(), files.end());
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const std::string& s) {
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
  };
  for (const fs::path& f : files) {
    mix(f.string());
    std::ifstream in(dir / f, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    mix(ss.str());
  }
  return h;
}

}  // namespace

TEST_CASE("usage errors exit with status 2") {
  CHECK(run("").status == 2);
  CHECK(run("fly").status == 2);
  CHECK(run("race --bogus 1 --out /tmp/x").status == 2);
  CHECK(run("race").status == 2);                         // --out is required
  CHECK(run("race --seed notanumber --out /tmp/x").status == 2);
  CHECK(run("race --config /no/such/file.cfg --out /tmp/x").status == 2);
  CHECK(run("evaluate").status == 2);
  CHECK(run("--help").status == 0);
}

TEST_CASE("runtime errors print a machine-readable line") {
  const fs::path empty = scratch("empty");
  fs::create_directories(empty);
  const RunResult e = run("evaluate " + quoted(empty) + " --out " + quoted(scratch("empty_out")));
  CHECK(e.status != 0);
  CHECK(e.status != 2);
  CHECK(e.output.find("error code=invalid-argument") != std::string::npos);

  const RunResult missing = run("evaluate " + quoted(scratch("nowhere")) + " --out " + quoted(scratch("x")));
  CHECK(missing.status == 1);
  CHECK(missing.output.find("error code=io-error") != std::string::npos);

  // Pixel mode without weights.
  const RunResult w = run("race --config " + config("tiny.cfg") + " --out " + quoted(scratch("noweights")));
  CHECK(w.status == 1);
  CHECK(w.output.find("error code=configuration-error") != std::string::npos);

  const RunResult t = run("train-dof --config " + config("tiny.cfg") + " --out " + quoted(scratch("nodata")));
  CHECK(t.status == 1);
  CHECK(t.output.find("error code=configuration-error") != std::string::npos);
}

TEST_CASE("collect, train, race and evaluate") {
  const fs::path data = scratch("pipeline_data");
  const RunResult c = run("collect-data --config " + config("tiny.cfg") + " --out " + quoted(data));
  INFO(c.output);
  REQUIRE(c.status == 0);
  REQUIRE(fs::exists(data / "dataset.dfds"));
  REQUIRE(fs::exists(data / "laps" / "lap_000.csv"));

  const RunResult t = run("train-dof --config " + config("tiny.cfg") + " --out " + quoted(data));
  INFO(t.output);
  REQUIRE(t.status == 0);
  REQUIRE(fs::exists(data / "dof.weights"));
  CHECK(t.output.find("epoch 1 ") != std::string::npos);

  // The emitted weights feed the race directly.
  auto race = [&](int seed, const fs::path& out) {
    return run("race --config " + config("tiny.cfg") + " --seed " + std::to_string(seed) + " --weights " +
               quoted(data / "dof.weights") + " --out " + quoted(out));
  };
  const fs::path r1 = scratch("race_a"), r2 = scratch("race_b"), r3 = scratch("race_c");
  const RunResult a = race(7, r1);
  INFO(a.output);
  REQUIRE(a.status == 0);
  REQUIRE(race(7, r2).status == 0);
  REQUIRE(race(8, r3).status == 0);
  CHECK(fs::exists(r1 / "lap_000.csv"));
  CHECK(tree_checksum(r1) == tree_checksum(r2));
  CHECK(tree_checksum(r3) != tree_checksum(r1));

  const fs::path eval = scratch("eval");
  const RunResult e = run("evaluate " + quoted(r1) + " " + quoted(data / "laps") + " --out " + quoted(eval));
  INFO(e.output);
  REQUIRE(e.status == 0);
  for (const char* f : {"table2.csv", "table3.csv", "table4.csv", "tv.csv", "laps.csv"}) CHECK(fs::exists(eval / f));
  CHECK(e.output.find("pixelmpc") != std::string::npos);
  CHECK(e.output.find("nominal") != std::string::npos);
}

TEST_CASE("bench writes a latency table") {
  const fs::path out = scratch("bench");
  const fs::path cfg = scratch("bench_cfg.cfg");
  std::ofstream(cfg) << "bench.batches = 1 8\nbench.horizons = 1 4\nbench.repetitions = 5\ntrain.hidden = 16 16\n";
  const RunResult b = run("bench --config " + quoted(cfg) + " --out " + quoted(out));
  INFO(b.output);
  REQUIRE(b.status == 0);
  REQUIRE(fs::exists(out / "bench.csv"));
  std::ifstream in(out / "bench.csv");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 5);
  CHECK(b.output.find("fits_budget=") != std::string::npos);
}
