// defectsim: run, check, compare and probe experiments from the shell.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "defectsim/experiment.hpp"
#include "defectsim/problems.hpp"

namespace {

using defectsim::ExperimentConfig;

struct Overrides {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> formats;
};

// Loads the config file and applies command-line overrides. The output
// directory falls back to the config, then DEFECTSIM_OUT, then "out".
int load(const Overrides& o, ExperimentConfig& config) {
  try {
    config = defectsim::load_experiment_config(o.config_path);
  } catch (const defectsim::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return defectsim::kExitBadInput;
  }
  if (o.seed) config.seed = *o.seed;
  if (!o.formats.empty()) config.outputs = {o.formats.begin(), o.formats.end()};
  if (!o.out_dir.empty()) {
    config.out_dir = o.out_dir;
  } else if (config.out_dir.empty()) {
    const char* env = std::getenv("DEFECTSIM_OUT");
    config.out_dir = env && *env ? env : "out";
  }
  return defectsim::kExitOk;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "experiment config (TOML or JSON)")->required();
  cmd->add_option("--out", o.out_dir, "output directory (default: $DEFECTSIM_OUT or ./out)");
  cmd->add_option("--seed", o.seed, "seed override");
  cmd->add_option("--format", o.formats, "csv, json or svg; repeatable")
      ->check(CLI::IsMember({"csv", "json", "svg"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulate federated optimization with rational, defecting agents"};
  app.require_subcommand(1);

  Overrides run_o, cmp_o, probe_o;
  auto* run = app.add_subcommand("run", "run algorithms on a problem; write traces and audits");
  add_common(run, run_o);
  auto* compare = app.add_subcommand("compare", "run two or more algorithms and align their traces");
  add_common(compare, cmp_o);
  auto* probe = app.add_subcommand("probe", "grid probe for bad initializations or step scaling");
  add_common(probe, probe_o);
  std::string problem_id;
  auto* check = app.add_subcommand("check", "validate a problem's assumptions");
  check->add_option("problem", problem_id, "problem id, e.g. quadratic:M=3,d=5,seed=7")->required();
  auto* list = app.add_subcommand("list", "print example problem ids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : defectsim::kExitBadInput;
  }

  ExperimentConfig config;
  if (*run) {
    if (int rc = load(run_o, config)) return rc;
    return defectsim::cmd_run(config, std::cout, std::cerr);
  }
  if (*compare) {
    if (int rc = load(cmp_o, config)) return rc;
    return defectsim::cmd_compare(config, std::cout, std::cerr);
  }
  if (*probe) {
    if (int rc = load(probe_o, config)) return rc;
    return defectsim::cmd_probe(config, std::cout, std::cerr);
  }
  if (*check) return defectsim::cmd_check(problem_id, std::cout, std::cerr);
  if (*list) {
    for (const auto& id : defectsim::catalog_examples()) std::cout << id << "\n";
  }
  return 0;
}
