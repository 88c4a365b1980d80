#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "flowconv/ingest.hpp"
#include "flowconv/synth.hpp"

namespace fs = std::filesystem;
using namespace flowconv;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

/// Scratch directory holding a short synthetic scenario and its dataset.
struct Workspace {
  fs::path dir;

  Workspace() {
    dir = fs::temp_directory_path() / ("flowconv_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream cfg(dir / "small.json");
    cfg << R"({"lat_min": 40.70, "lat_max": 40.80, "lon_min": -74.02, "lon_max": -73.92,
              "m": 4, "k": 4, "interval_seconds": 3600, "t0": 1420070400,
              "days": 3, "history_T": 3, "layers": 1, "hidden": 4, "epochs": 2, "seed": 7})";
  }
  ~Workspace() { fs::remove_all(dir); }

  fs::path operator/(const std::string& name) const { return dir / name; }

  Run run(const std::string& args, const std::string& env = "") const {
    const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd =
        env + " " + std::string(FLOWCONV_CLI) + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  std::string config() const { return "--config " + (dir / "small.json").string(); }

  void make_dataset() const {
    REQUIRE(run("synth " + config() + " --out " + (dir / "trips.csv").string()).code == 0);
    REQUIRE(run("ingest " + config() + " --trips " + (dir / "trips.csv").string() + " --out " +
                (dir / "data.fcds").string())
                .code == 0);
  }
  std::string data() const { return "--data " + (dir / "data.fcds").string(); }
};

}  // namespace

TEST_CASE("ingest of synthetic trips matches in-memory aggregation") {
  Workspace ws;
  ws.make_dataset();
  SynthConfig cfg = benchmark_scenario(7);
  cfg.days = 3;
  const auto trips = generate(cfg).trips;
  const IntervalSeries expect = aggregate(assign_trips(trips, cfg.grid), cfg.grid);
  const IntervalSeries got = read_dataset_file((ws / "data.fcds").string());
  REQUIRE(got.intervals() == expect.intervals());
  CHECK(got.intervals() == 72);
  for (std::size_t t = 0; t < got.intervals(); ++t) {
    CHECK(got.volumes[t].values == expect.volumes[t].values);
    CHECK(got.flows[t] == expect.flows[t]);
  }
  CHECK(got.grid == cfg.grid);
}

TEST_CASE("the shipped benchmark config reproduces the seed-7 scenario") {
  Workspace ws;
  const std::string config = (fs::path(FLOWCONV_CONFIGS) / "benchmark.json").string();
  REQUIRE(ws.run("synth --config " + config + " --out " + (ws / "bench.csv").string()).code == 0);
  std::ifstream in(ws / "bench.csv");
  const auto expect = generate(benchmark_scenario(7)).trips;
  CHECK(read_trip_csv(in).trips == expect);
}

TEST_CASE("ingest edge cases") {
  Workspace ws;
  {
    std::ofstream empty(ws / "empty.csv");
    empty << kTripCsvHeader << '\n';
  }
  const Run r = ws.run("ingest " + ws.config() + " --trips " + (ws / "empty.csv").string() + " --out " +
                       (ws / "empty.fcds").string());
  CHECK(r.code == 0);
  CHECK(r.err.find("warning") != std::string::npos);
  CHECK(r.out.find("intervals: 0") != std::string::npos);
  CHECK(read_dataset_file((ws / "empty.fcds").string()).intervals() == 0);

  const Run missing = ws.run("ingest " + ws.config() + " --trips " + (ws / "nope.csv").string() + " --out " +
                             (ws / "x.fcds").string());
  CHECK(missing.code != 0);
  CHECK(count_lines(missing.err) == 1);

  {
    std::ofstream bad(ws / "bad.json");
    bad << R"({"m": 4, "k": 4, "colour": "red"})";
  }
  const Run unknown = ws.run("ingest --config " + (ws / "bad.json").string() + " --trips " +
                             (ws / "empty.csv").string() + " --out " + (ws / "x.fcds").string());
  CHECK(unknown.code != 0);
  CHECK(unknown.err.find("colour") != std::string::npos);
  CHECK(count_lines(unknown.err) == 1);

  {
    std::ofstream bad(ws / "broken.json");
    bad << "{\"m\": ";
  }
  CHECK(ws.run("synth --config " + (ws / "broken.json").string() + " --out " + (ws / "t.csv").string()).code != 0);
}

TEST_CASE("train, eval and determinism") {
  Workspace ws;
  ws.make_dataset();
  const std::string a = (ws / "a.fcgru").string(), b = (ws / "b.fcgru").string();
  const Run first = ws.run("train " + ws.config() + " " + ws.data() + " --out " + a + " --loss-log " +
                           (ws / "loss.csv").string());
  REQUIRE(first.code == 0);
  CHECK(first.out.find("\"seed\":7") != std::string::npos);
  CHECK(first.out.find("\"variant\":\"full\"") != std::string::npos);
  REQUIRE(ws.run("train " + ws.config() + " " + ws.data() + " --out " + b + " --threads 2").code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(count_lines(slurp(ws / "loss.csv")) == 3);

  const Run eval = ws.run("eval " + ws.data() + " --checkpoint " + a + " --out " + (ws / "eval").string());
  REQUIRE(eval.code == 0);
  const std::string metrics = slurp(ws / "eval" / "metrics.csv");
  CHECK(metrics.rfind("method,variant,rmse,mae,n\n", 0) == 0);
  CHECK(metrics.find("\nFlowConvGRU,full,") != std::string::npos);

  const Run ha = ws.run("eval " + ws.config() + " " + ws.data() + " --variant ha --out " + (ws / "ha").string());
  REQUIRE(ha.code == 0);
  CHECK(slurp(ws / "ha" / "metrics.csv").find("\nHA,ha,") != std::string::npos);

  CHECK(ws.run("eval " + ws.data() + " --out " + (ws / "none").string()).code != 0);
  CHECK(ws.run("eval " + ws.data() + " --checkpoint " + a + " --variant nc --out " + (ws / "x").string()).code != 0);
}

TEST_CASE("seed precedence: flag over environment over file") {
  Workspace ws;
  ws.make_dataset();
  const std::string base = "train " + ws.config() + " " + ws.data() + " --epochs 0 --out " + (ws / "c.fcgru").string();
  CHECK(ws.run(base).out.find("\"seed\":7") != std::string::npos);
  CHECK(ws.run(base, "FCGRU_SEED=11").out.find("\"seed\":11") != std::string::npos);
  CHECK(ws.run(base + " --seed 13", "FCGRU_SEED=11").out.find("\"seed\":13") != std::string::npos);
  CHECK(ws.run(base, "FCGRU_THREADS=abc").code != 0);
}

TEST_CASE("ablate, analyze and sweep write their tables") {
  Workspace ws;
  ws.make_dataset();
  const Run ablate = ws.run("ablate " + ws.config() + " " + ws.data() + " --epochs 1 --out " + (ws / "abl").string());
  REQUIRE(ablate.code == 0);
  const std::string metrics = slurp(ws / "abl" / "metrics.csv");
  CHECK(count_lines(metrics) == 6);
  for (const char* row : {"\nFlowConvGRU,full,", "\nFlowConvGRU-nc,nc,", "\nFlowConvGRU-nf,nf,", "\nFC-GRU,fc,",
                          "\nHA,ha,"})
    CHECK(metrics.find(row) != std::string::npos);

  const Run analyze = ws.run("analyze " + ws.config() + " " + ws.data() + " --checkpoint " +
                             (ws / "abl" / "full.fcgru").string() + " --emd-threshold 0.1 --out " +
                             (ws / "an").string());
  REQUIRE(analyze.code == 0);
  CHECK(count_lines(slurp(ws / "an" / "churn.csv")) == 72);
  CHECK(count_lines(slurp(ws / "an" / "hourly.csv")) == 25);
  const std::string filtered = slurp(ws / "an" / "filtered.csv");
  CHECK(count_lines(filtered) == 5);
  CHECK(filtered.find("high_churn,FlowConvGRU,full,") != std::string::npos);
  CHECK(filtered.find("all,HA,ha,") != std::string::npos);

  const Run sweep = ws.run("sweep " + ws.config() + " " + ws.data() + " --epochs 1 --layers 1,2 --out " +
                           (ws / "sw").string());
  REQUIRE(sweep.code == 0);
  const std::string rows = slurp(ws / "sw" / "layer_sweep.csv");
  CHECK(rows.rfind("layers,rmse,mae\n1,", 0) == 0);
  CHECK(count_lines(rows) == 3);
  CHECK(slurp(ws / "sw" / "layers1.fcgru") != slurp(ws / "sw" / "layers2.fcgru"));
}
