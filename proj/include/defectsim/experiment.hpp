#pragma once

// Config-driven experiment runner behind the command-line tool.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "defectsim/algorithms.hpp"
#include "defectsim/analysis.hpp"
#include "defectsim/core.hpp"

namespace defectsim {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRunFailed = 1;
inline constexpr int kExitBadInput = 2;
inline constexpr int kExitUnwritable = 3;

struct ProbeSettings {
  std::string mode = "grid";  // "grid" or "scaling"
  double lo = -3.0;
  double hi = 3.0;
  int n = 7;
  int max_exponent = 20;
};

struct ExperimentConfig {
  std::string problem_id;
  std::vector<std::string> algorithm_ids;
  std::optional<double> eta;  // nullopt: "auto", the step-size bound
  std::vector<double> epsilons;
  double delta = 0.05;
  long max_rounds = 1'000'000;
  std::optional<Point> w0;  // nullopt: "seeded"
  std::uint64_t seed = 0;
  bool enforce_preconditions = true;
  std::set<std::string> outputs{"csv", "json", "svg"};
  std::filesystem::path out_dir;
  ProbeSettings probe;
};

/// Parses TOML, or JSON when the text starts with '{'. Unknown keys and
/// ill-typed values throw InvalidInput.
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Resolves "auto" eta and "seeded" w0 against the problem.
RunConfig resolve_run_config(const ExperimentConfig& config, const ProblemInstance& problem);

struct RunResult {
  std::string algorithm_id;
  Trace trace;
  AuditReport audit;
  DefectionLabel label = DefectionLabel::NoDefection;
  double final_loss = 0.0;
  std::string error;  // set when the run refused to start; other fields unset
};

/// Runs every algorithm in memory. Throws InvalidInput for unresolvable ids
/// or config errors; a run whose preconditions fail is reported in `error`.
std::vector<RunResult> execute(const ExperimentConfig& config);

/// Round-aligned CSV over several runs: F_avg, per-agent losses and
/// defections for each algorithm.
std::string comparison_csv(const std::vector<RunResult>& results);

int cmd_run(const ExperimentConfig& config, std::ostream& out, std::ostream& err);
int cmd_check(const std::string& problem_id, std::ostream& out, std::ostream& err);
int cmd_compare(const ExperimentConfig& config, std::ostream& out, std::ostream& err);
int cmd_probe(const ExperimentConfig& config, std::ostream& out, std::ostream& err);

}  // namespace defectsim
