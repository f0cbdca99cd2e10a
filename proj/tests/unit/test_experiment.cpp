#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "defectsim/experiment.hpp"
#include "defectsim/trace_io.hpp"

using namespace defectsim;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("defectsim_test_" + name);
  fs::remove_all(dir);
  return dir;
}

ExperimentConfig quadratic_config() {
  return parse_experiment_config(R"(
problem = "quadratic:M=2,d=3,seed=1"
algorithms = ["ada-gd", "uniform-gd"]
epsilon = 0.1
delta = 0.05
max_rounds = 20000
seed = 3
)");
}

}  // namespace

TEST_CASE("TOML and JSON configs parse to the same thing") {
  const auto toml = parse_experiment_config(R"(
problem = "bad-region"
algorithm = "uniform-gd"
eta = 0.01
w0 = [1.0, 1.0]
outputs = ["json"]
[probe]
mode = "scaling"
max_exponent = 5
)");
  const auto json = parse_experiment_config(
      R"({"problem": "bad-region", "algorithm": "uniform-gd", "eta": 0.01, "w0": [1.0, 1.0],
          "outputs": ["json"], "probe": {"mode": "scaling", "max_exponent": 5}})");
  for (const auto* c : {&toml, &json}) {
    CHECK(c->problem_id == "bad-region");
    CHECK(c->algorithm_ids == std::vector<std::string>{"uniform-gd"});
    CHECK(c->eta == 0.01);
    REQUIRE(c->w0);
    CHECK(c->w0->size() == 2);
    CHECK(c->outputs == std::set<std::string>{"json"});
    CHECK(c->probe.mode == "scaling");
    CHECK(c->probe.max_exponent == 5);
  }
  const auto defaults = parse_experiment_config("problem = \"benign\"\nalgorithm = \"ada-gd\"\neta = \"auto\"\nw0 = \"seeded\"\n");
  CHECK_FALSE(defaults.eta);
  CHECK_FALSE(defaults.w0);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_experiment_config("problem = \"benign\"\nbogus = 1\n"), InvalidInput);
  CHECK_THROWS_AS(parse_experiment_config("problem = 3\n"), InvalidInput);
  CHECK_THROWS_AS(parse_experiment_config("{not json"), InvalidInput);
  CHECK_THROWS_AS(parse_experiment_config("outputs = [\"pdf\"]\n"), InvalidInput);
}

TEST_CASE("unknown algorithm id exits 2 and writes nothing") {
  auto c = quadratic_config();
  c.algorithm_ids = {"no-such-algorithm"};
  c.out_dir = scratch("unknown");
  std::ostringstream out, err;
  CHECK(cmd_run(c, out, err) == kExitBadInput);
  CHECK_FALSE(fs::exists(c.out_dir));
  CHECK(err.str().find("no-such-algorithm") != std::string::npos);
}

TEST_CASE("unwritable output directory exits 3") {
  const fs::path dir = scratch("unwritable");
  fs::create_directories(dir);
  write_text_file(dir / "file", "x");
  auto c = quadratic_config();
  c.out_dir = dir / "file" / "sub";
  std::ostringstream out, err;
  CHECK(cmd_run(c, out, err) == kExitUnwritable);
}

TEST_CASE("run writes the requested files") {
  auto c = quadratic_config();
  c.algorithm_ids = {"ada-gd"};
  c.outputs = {"json", "csv"};
  c.out_dir = scratch("run");
  std::ostringstream out, err;
  REQUIRE(cmd_run(c, out, err) == kExitOk);
  CHECK(fs::exists(c.out_dir / "summary.json"));
  CHECK(fs::exists(c.out_dir / "ada-gd" / "trace.json"));
  CHECK(fs::exists(c.out_dir / "ada-gd" / "trace.csv"));
  CHECK(fs::exists(c.out_dir / "ada-gd" / "audit.json"));
  CHECK_FALSE(fs::exists(c.out_dir / "ada-gd" / "plot.svg"));
  const auto summary = nlohmann::json::parse(read_text_file(c.out_dir / "summary.json"));
  CHECK(summary["runs"][0]["audits_passed"].get<bool>());
  CHECK(summary["runs"][0]["defections"].get<int>() == 0);
}

TEST_CASE("compare of an algorithm against itself") {
  auto c = quadratic_config();
  c.algorithm_ids = {"uniform-gd", "uniform-gd"};
  c.out_dir = scratch("compare_self");
  std::ostringstream out, err;
  REQUIRE(cmd_compare(c, out, err) == kExitOk);
  const auto summary = nlohmann::json::parse(read_text_file(c.out_dir / "summary.json"));
  CHECK(summary["final_F_delta"][0]["final_F_delta"].get<double>() == 0.0);
  const auto csv = read_text_file(c.out_dir / "compare.csv");
  std::istringstream in(csv);
  std::string header, row;
  std::getline(in, header);
  CHECK(header.find("uniform-gd:F_avg") != std::string::npos);
  while (std::getline(in, row)) {
    std::vector<std::string> cells;
    std::istringstream rs(row);
    for (std::string cell; std::getline(rs, cell, ',');) cells.push_back(cell);
    if (row.back() == ',') cells.emplace_back();
    REQUIRE(cells.size() % 2 == 1);
    const std::size_t half = (cells.size() - 1) / 2;
    for (std::size_t k = 1; k <= half; ++k) CHECK(cells[k] == cells[k + half]);
  }
  CHECK(fs::exists(c.out_dir / "compare.svg"));
  CHECK(fs::exists(c.out_dir / "uniform-gd"));
  CHECK(fs::exists(c.out_dir / "uniform-gd_2"));
}

TEST_CASE("compare needs two algorithms") {
  auto c = quadratic_config();
  c.algorithm_ids = {"ada-gd"};
  c.out_dir = scratch("compare_one");
  std::ostringstream out, err;
  CHECK(cmd_compare(c, out, err) == kExitBadInput);
}

TEST_CASE("a refused run exits 1 but keeps the others") {
  auto c = parse_experiment_config(R"(
problem = "bad-region"
algorithms = ["uniform-gd", "ada-gd"]
eta = 0.01
w0 = [1.0, 1.0]
max_rounds = 200
)");
  c.out_dir = scratch("refused");
  std::ostringstream out, err;
  CHECK(cmd_compare(c, out, err) == kExitRunFailed);
  CHECK(fs::exists(c.out_dir / "uniform-gd" / "trace.json"));
  CHECK_FALSE(fs::exists(c.out_dir / "ada-gd"));
  const auto summary = nlohmann::json::parse(read_text_file(c.out_dir / "summary.json"));
  CHECK(summary["runs"][1].contains("error"));
}

TEST_CASE("check command") {
  std::ostringstream out, err;
  CHECK(cmd_check("quadratic:M=3,d=5,seed=2", out, err) == kExitOk);
  CHECK(out.str().find("warning") == std::string::npos);

  std::ostringstream out2, err2;
  CHECK(cmd_check("benign", out2, err2) == kExitOk);
  CHECK(out2.str().find("FAIL  independence") != std::string::npos);
  CHECK(out2.str().find("warning") != std::string::npos);

  std::ostringstream out3, err3;
  CHECK(cmd_check("nope", out3, err3) == kExitBadInput);
}

TEST_CASE("probe grid writes a report") {
  auto c = parse_experiment_config(R"(
problem = "bad-region"
algorithms = ["uniform-gd"]
eta = 0.05
max_rounds = 2000
[probe]
lo = 0.0
hi = 2.0
n = 3
)");
  c.out_dir = scratch("probe");
  std::ostringstream out, err;
  REQUIRE(cmd_probe(c, out, err) == kExitOk);
  const auto report = nlohmann::json::parse(read_text_file(c.out_dir / "probe.json"));
  CHECK(report.contains("points"));
  CHECK(report["points"].size() == 9);
  CHECK(fs::exists(c.out_dir / "probe.csv"));
}
