#include "latentreg/pipeline.hpp"
#include "latentreg/serialize.hpp"
#include "support.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

using namespace latentreg;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliResult cli(const std::string& args, const fs::path& scratch) {
  const fs::path out = scratch / "stdout.txt";
  const fs::path err = scratch / "stderr.txt";
  const std::string cmd = std::string(LATENTREG_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

RunConfig small_run(const fs::path& out, std::vector<std::uint64_t> seeds) {
  RunConfig rc;
  SynthConfig sc;
  sc.n = 80;
  sc.p = 12;
  sc.d_true = 2;
  sc.noise_sd = 0.4;
  sc.subgroups = {{12, 0, 2.0}};
  sc.seed = 5;
  rc.data.synthetic = sc;
  rc.train.d = 2;
  rc.train.epochs = 3;
  rc.train.lr = 1e-3;
  rc.diagnostics.n_clusters = 4;
  rc.diagnostics.min_size = 1;
  rc.seeds = std::move(seeds);
  rc.output_dir = out;
  return rc;
}

std::set<std::string> files_on_disk(const fs::path& root) {
  std::set<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.insert(fs::relative(e.path(), root).generic_string());
  return out;
}

std::set<std::string> inventory(const Json& manifest) {
  std::set<std::string> out;
  for (const auto& f : manifest.at("files")) out.insert(f.at("path").get<std::string>());
  return out;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("version and usage errors") {
    const fs::path dir = testing::scratch_dir("cli_version");
    const CliResult v = cli("--version", dir);
    CHECK(v.code == 0);
    CHECK(v.out.find(kVersion) != std::string::npos);
    CHECK(cli("", dir).code == 1);
    CHECK(cli("frobnicate", dir).code == 1);
    CHECK(cli("run --epochs notanumber", dir).code == 1);
  }

  TEST_CASE("synth writes a deterministic cohort") {
    const fs::path dir = testing::scratch_dir("cli_synth");
    const CliResult a = cli("synth --n 200 --p 60 --seed 9 --out " + (dir / "a").string(), dir);
    REQUIRE(a.code == 0);
    CHECK(line_count(dir / "a" / "synthetic.csv") == 201);
    CHECK(fs::exists(dir / "a" / "synthetic_truth.json"));
    REQUIRE(cli("synth --n 200 --p 60 --seed 9 --out " + (dir / "b").string(), dir).code == 0);
    CHECK(sha256_file(dir / "a" / "synthetic.csv") == sha256_file(dir / "b" / "synthetic.csv"));
    CHECK(sha256_file(dir / "a" / "synthetic_truth.json") == sha256_file(dir / "b" / "synthetic_truth.json"));
    REQUIRE(cli("synth --n 200 --p 60 --seed 10 --out " + (dir / "c").string(), dir).code == 0);
    CHECK(sha256_file(dir / "a" / "synthetic.csv") != sha256_file(dir / "c" / "synthetic.csv"));
  }

  TEST_CASE("invalid synthetic configuration names the field") {
    const fs::path dir = testing::scratch_dir("cli_badsynth");
    write_text(dir / "bad.json", R"({"n": 20, "p": 10, "d_true": 2, "subgroups": [{"size": 50, "affected_factor": 0, "slope_delta": 1}]})");
    const CliResult r = cli("synth --config " + (dir / "bad.json").string() + " --out " + (dir / "o").string(), dir);
    CHECK(r.code == 1);
    CHECK(r.err.find("subgroups") != std::string::npos);

    write_text(dir / "typo.json", R"({"n": 20, "pp": 10})");
    const CliResult t = cli("synth --config " + (dir / "typo.json").string(), dir);
    CHECK(t.code == 1);
    CHECK(t.err.find("pp") != std::string::npos);
  }

  TEST_CASE("run produces a complete manifest and a report") {
    const fs::path dir = testing::scratch_dir("cli_run");
    const RunConfig rc = small_run(dir / "run", {1, 2, 3});
    write_json(dir / "cfg.json", to_json(rc));
    const CliResult r = cli("run --config " + (dir / "cfg.json").string(), dir);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("manifest.json") != std::string::npos);

    const Json m = read_json(dir / "run" / "manifest.json");
    CHECK(m.at("status") == "complete");
    CHECK(m.at("version") == kVersion);
    CHECK(m.at("config") == to_json(rc));
    CHECK(m.at("representative").contains("seed"));
    CHECK(m.at("runs").size() == 3);
    std::set<std::string> disk = files_on_disk(dir / "run");
    disk.erase("manifest.json");
    CHECK(disk == inventory(m));
    for (const auto& f : m.at("files"))
      CHECK(f.at("sha256") == sha256_file(dir / "run" / f.at("path").get<std::string>()));
    for (const auto& f : disk) CHECK(f.rfind("benchmarks/", 0) != 0);
    CHECK(disk.count("stability.csv") == 1);
    CHECK(disk.count("global_model.csv") == 1);
    CHECK(disk.count("subgroups.json") == 1);

    const CliResult rep = cli("report " + (dir / "run").string(), dir);
    REQUIRE(rep.code == 0);
    const Json summary = Json::parse(rep.out);
    CHECK(summary.at("subgroups").is_array());
    CHECK(summary.at("benchmarks").empty());
    CHECK(summary.at("global_model").at("terms").size() == 3);
    CHECK_FALSE(summary.at("stability").is_null());

    // Reusing the directory replaces the previous run; a foreign directory is refused.
    CHECK(cli("run --config " + (dir / "cfg.json").string(), dir).code == 0);
    fs::create_directories(dir / "foreign");
    write_text(dir / "foreign" / "keep.txt", "x");
    const CliResult refused = cli("run --config " + (dir / "cfg.json").string() + " --out " + (dir / "foreign").string(), dir);
    CHECK(refused.code == 1);
    CHECK(fs::exists(dir / "foreign" / "keep.txt"));
  }

  TEST_CASE("benchmarks and report ordering") {
    const fs::path dir = testing::scratch_dir("cli_bench");
    RunConfig rc = small_run(dir / "run", {1, 2});
    rc.benchmarks.enabled = true;
    write_json(dir / "cfg.json", to_json(rc));
    REQUIRE(cli("run --config " + (dir / "cfg.json").string(), dir).code == 0);
    const Json m = read_json(dir / "run" / "manifest.json");
    const auto inv = inventory(m);
    CHECK(inv.count("benchmarks/benchmarks.csv") == 1);
    CHECK(inv.count("benchmarks/stepwise_p0_1.csv") == 1);
    CHECK(line_count(dir / "run" / "benchmarks" / "benchmarks.csv") == 1 + 2 + 2 + 1);

    const CliResult rep = cli("report " + (dir / "run").string() + " --out " + (dir / "summary.json").string(), dir);
    REQUIRE(rep.code == 0);
    const Json summary = read_json(dir / "summary.json");
    REQUIRE(summary.at("benchmarks").size() == 3);
    CHECK(summary["benchmarks"][0]["method"] == "proposed");
    CHECK(summary["benchmarks"][1]["method"] == "plain_ae");
    CHECK(summary["benchmarks"][2]["method"] == "pca");
    CHECK(summary["benchmarks"][0]["runs"] == 2);
  }

  TEST_CASE("fifteen seeds give fifteen models and one stability table") {
    const fs::path dir = testing::scratch_dir("cli_seeds");
    RunConfig rc = small_run(dir / "run", {});
    rc.train.epochs = 1;
    write_json(dir / "cfg.json", to_json(small_run(dir / "run", {1})));
    REQUIRE(cli("run --config " + (dir / "cfg.json").string() + " --seeds 1-15 --epochs 1", dir).code == 0);
    const auto disk = files_on_disk(dir / "run");
    std::size_t models = 0;
    for (const auto& f : disk)
      if (f.size() > 11 && f.compare(f.size() - 11, 11, "/model.json") == 0) ++models;
    CHECK(models == 15);
    CHECK(disk.count("stability.csv") == 1);
    const Json m = read_json(dir / "run" / "manifest.json");
    CHECK(m.at("config").at("seeds").size() == 15);
    CHECK(m.at("config").at("train").at("epochs") == 1);
  }

  TEST_CASE("exit codes for configuration and runtime failures") {
    const fs::path dir = testing::scratch_dir("cli_fail");
    CHECK(cli("report " + (dir / "nowhere").string(), dir).code == 1);
    write_json(dir / "cfg.json", to_json(small_run(dir / "run", {1})));
    CHECK(cli("run --config " + (dir / "cfg.json").string() + " --seeds 2,2", dir).code == 1);

    Json bad = to_json(small_run(dir / "run", {1}));
    bad["train"]["mystery"] = 1;
    write_json(dir / "bad.json", bad);
    const CliResult unknown = cli("run --config " + (dir / "bad.json").string(), dir);
    CHECK(unknown.code == 1);
    CHECK(unknown.err.find("train.mystery") != std::string::npos);

    const CliResult failed = cli("run --config " + (dir / "cfg.json").string() + " --d 40", dir);
    CHECK(failed.code == 2);
    const Json m = read_json(dir / "run" / "manifest.json");
    CHECK(m.at("status") == "failed");
    CHECK(m.at("failed_stage") == "train");
    std::set<std::string> disk = files_on_disk(dir / "run");
    disk.erase("manifest.json");
    CHECK(disk == inventory(m));
    CHECK(cli("report " + (dir / "run").string(), dir).code == 2);
  }

  TEST_CASE("csv input and flag overrides") {
    const fs::path dir = testing::scratch_dir("cli_csv");
    REQUIRE(cli("synth --n 60 --p 10 --d-true 2 --seed 4 --out " + (dir / "data").string(), dir).code == 0);
    const CliResult r = cli("run --csv " + (dir / "data" / "synthetic.csv").string() +
                                " --outcome y --seeds 1 --epochs 2 --d 2 --no-preprocess --out " + (dir / "run").string(),
                            dir);
    REQUIRE(r.code == 0);
    const Json m = read_json(dir / "run" / "manifest.json");
    CHECK(m.at("config").at("preprocess").at("enabled") == false);
    CHECK(m.at("config").at("train").at("d") == 2);
    CHECK(cli("run --csv " + (dir / "missing.csv").string() + " --out " + (dir / "run2").string(), dir).code == 1);
  }
}
