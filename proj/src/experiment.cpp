#include "defectsim/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>
#include <toml.hpp>

#include "defectsim/problems.hpp"
#include "defectsim/svg.hpp"
#include "defectsim/trace_io.hpp"

namespace defectsim {

using nlohmann::json;

namespace {

double as_number(const json& j, const std::string& key) {
  if (!j.is_number()) throw InvalidInput("config key '" + key + "' must be a number");
  return j.get<double>();
}

long as_integer(const json& j, const std::string& key) {
  if (!j.is_number_integer()) throw InvalidInput("config key '" + key + "' must be an integer");
  return j.get<long>();
}

std::string as_string(const json& j, const std::string& key) {
  if (!j.is_string()) throw InvalidInput("config key '" + key + "' must be a string");
  return j.get<std::string>();
}

std::vector<double> as_numbers(const json& j, const std::string& key) {
  if (!j.is_array()) throw InvalidInput("config key '" + key + "' must be a list of numbers");
  std::vector<double> v;
  for (const auto& x : j) v.push_back(as_number(x, key));
  return v;
}

ExperimentConfig from_json(const json& j) {
  if (!j.is_object()) throw InvalidInput("config must be a table/object");
  ExperimentConfig c;
  bool have_problem = false;
  for (const auto& [key, v] : j.items()) {
    if (key == "problem") {
      c.problem_id = as_string(v, key);
      have_problem = true;
    } else if (key == "algorithms") {
      if (!v.is_array() || v.empty()) throw InvalidInput("'algorithms' must be a non-empty list");
      for (const auto& a : v) c.algorithm_ids.push_back(as_string(a, key));
    } else if (key == "algorithm") {
      c.algorithm_ids.push_back(as_string(v, key));
    } else if (key == "eta") {
      if (v.is_string()) {
        if (v.get<std::string>() != "auto") throw InvalidInput("eta must be a number or \"auto\"");
        c.eta.reset();
      } else {
        c.eta = as_number(v, key);
        if (!(*c.eta > 0.0)) throw InvalidInput("eta must be positive");
      }
    } else if (key == "epsilon") {
      c.epsilons = {as_number(v, key)};
    } else if (key == "epsilons") {
      c.epsilons = as_numbers(v, key);
    } else if (key == "delta") {
      c.delta = as_number(v, key);
    } else if (key == "max_rounds") {
      c.max_rounds = as_integer(v, key);
      if (c.max_rounds < 1) throw InvalidInput("max_rounds must be positive");
    } else if (key == "w0") {
      if (v.is_string()) {
        if (v.get<std::string>() != "seeded") throw InvalidInput("w0 must be a list or \"seeded\"");
        c.w0.reset();
      } else {
        const auto xs = as_numbers(v, key);
        c.w0 = Eigen::Map<const Point>(xs.data(), static_cast<Eigen::Index>(xs.size()));
      }
    } else if (key == "seed") {
      const long s = as_integer(v, key);
      if (s < 0) throw InvalidInput("seed must be non-negative");
      c.seed = static_cast<std::uint64_t>(s);
    } else if (key == "outputs") {
      if (!v.is_array()) throw InvalidInput("'outputs' must be a list");
      c.outputs.clear();
      for (const auto& o : v) {
        const std::string f = as_string(o, key);
        if (f != "csv" && f != "json" && f != "svg") {
          throw InvalidInput("unknown output format '" + f + "'");
        }
        c.outputs.insert(f);
      }
    } else if (key == "enforce_preconditions") {
      if (!v.is_boolean()) throw InvalidInput("enforce_preconditions must be a boolean");
      c.enforce_preconditions = v.get<bool>();
    } else if (key == "out_dir") {
      c.out_dir = as_string(v, key);
    } else if (key == "probe") {
      if (!v.is_object()) throw InvalidInput("'probe' must be a table");
      for (const auto& [pk, pv] : v.items()) {
        if (pk == "mode") {
          c.probe.mode = as_string(pv, pk);
          if (c.probe.mode != "grid" && c.probe.mode != "scaling") {
            throw InvalidInput("probe.mode must be \"grid\" or \"scaling\"");
          }
        } else if (pk == "lo") {
          c.probe.lo = as_number(pv, pk);
        } else if (pk == "hi") {
          c.probe.hi = as_number(pv, pk);
        } else if (pk == "n") {
          c.probe.n = static_cast<int>(as_integer(pv, pk));
        } else if (pk == "max_exponent") {
          c.probe.max_exponent = static_cast<int>(as_integer(pv, pk));
        } else {
          throw InvalidInput("unknown probe key '" + pk + "'");
        }
      }
    } else {
      throw InvalidInput("unknown config key '" + key + "'");
    }
  }
  if (!have_problem) throw InvalidInput("config needs 'problem'");
  if (c.algorithm_ids.empty()) throw InvalidInput("config needs 'algorithms'");
  if (!(c.delta > 0.0)) throw InvalidInput("delta must be positive");
  return c;
}

std::string dir_name(const std::string& id) {
  std::string out;
  for (char ch : id) out += std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' ? ch : '_';
  return out;
}

// Unique directory per algorithm; a repeated id gets a numeric suffix.
std::vector<std::string> dir_names(const std::vector<RunResult>& results) {
  std::vector<std::string> names;
  std::map<std::string, int> seen;
  for (const auto& r : results) {
    std::string n = dir_name(r.algorithm_id);
    const int k = ++seen[n];
    if (k > 1) n += "_" + std::to_string(k);
    names.push_back(n);
  }
  return names;
}

LineChart run_chart(const RunResult& r) {
  LineChart chart;
  chart.title = r.trace.problem_id + " / " + r.algorithm_id;
  chart.y_label = "loss";
  ChartSeries avg;
  avg.name = "F_avg";
  const int m = r.trace.rounds.empty() ? 0 : static_cast<int>(r.trace.rounds[0].per_agent_loss.size());
  std::vector<ChartSeries> agents(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) agents[i].name = "F_" + std::to_string(i);
  for (const auto& rec : r.trace.rounds) {
    avg.x.push_back(rec.round);
    avg.y.push_back(rec.average_loss);
    for (int i = 0; i < m; ++i) {
      agents[i].x.push_back(rec.round);
      agents[i].y.push_back(rec.per_agent_loss[i]);
    }
    if (!rec.defections.empty()) avg.markers.push_back(rec.round);
  }
  chart.series.push_back(std::move(avg));
  for (auto& a : agents) chart.series.push_back(std::move(a));
  return chart;
}

using FileSet = std::vector<std::pair<std::filesystem::path, std::string>>;

void add_run_files(FileSet& files, const std::filesystem::path& dir, const RunResult& r,
                   const std::set<std::string>& outputs) {
  files.emplace_back(dir / "audit.json", audit_to_json(r.audit).dump(2) + "\n");
  if (outputs.count("json")) files.emplace_back(dir / "trace.json", trace_to_json(r.trace).dump() + "\n");
  if (outputs.count("csv")) files.emplace_back(dir / "trace.csv", trace_to_csv(r.trace));
  if (outputs.count("svg")) files.emplace_back(dir / "plot.svg", render_svg(run_chart(r)));
}

int write_all(const FileSet& files, std::ostream& err) {
  try {
    for (const auto& [path, text] : files) {
      std::filesystem::create_directories(path.parent_path());
      write_text_file(path, text);
    }
  } catch (const std::exception& e) {
    err << "error: cannot write outputs: " << e.what() << "\n";
    return kExitUnwritable;
  }
  return kExitOk;
}

json summary_json(const std::vector<RunResult>& results) {
  json runs = json::array();
  for (const auto& r : results) {
    if (!r.error.empty()) {
      runs.push_back({{"algorithm", r.algorithm_id}, {"error", r.error}});
      continue;
    }
    runs.push_back({{"algorithm", r.algorithm_id},
                    {"outcome", std::string(to_string(r.trace.outcome.kind))},
                    {"reason", r.trace.outcome.reason},
                    {"rounds", r.trace.rounds.size()},
                    {"defections", r.trace.total_defections()},
                    {"label", std::string(to_string(r.label))},
                    {"final_F", r.final_loss},
                    {"audits_passed", r.audit.all_passed()},
                    {"warnings", r.trace.warnings}});
  }
  return {{"runs", runs}};
}

void print_summary(const std::vector<RunResult>& results, std::ostream& out) {
  for (const auto& r : results) {
    if (!r.error.empty()) {
      out << r.algorithm_id << ": not run: " << r.error << "\n";
      continue;
    }
    out << r.algorithm_id << ": outcome=" << to_string(r.trace.outcome.kind)
        << " rounds=" << r.trace.rounds.size() << " defections=" << r.trace.total_defections()
        << " label=" << to_string(r.label) << " F_final=" << format_double(r.final_loss)
        << " audits=" << (r.audit.all_passed() ? "pass" : "fail") << "\n";
    if (!r.trace.outcome.reason.empty()) out << "  reason: " << r.trace.outcome.reason << "\n";
    for (const auto& w : r.trace.warnings) out << "  warning: " << w << "\n";
  }
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw InvalidInput(std::string("malformed JSON config: ") + e.what());
    }
    return from_json(j);
  }
  toml::table table;
  try {
    table = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "malformed TOML config: " << e.description() << " at line " << e.source().begin.line;
    throw InvalidInput(msg.str());
  }
  std::ostringstream ss;
  ss << toml::json_formatter{table};
  return from_json(json::parse(ss.str()));
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw InvalidInput(e.what());
  }
  return parse_experiment_config(text);
}

RunConfig resolve_run_config(const ExperimentConfig& config, const ProblemInstance& problem) {
  RunConfig rc;
  rc.epsilons = config.epsilons;
  rc.delta = config.delta;
  rc.max_rounds = config.max_rounds;
  rc.seed = config.seed;
  rc.enforce_preconditions = config.enforce_preconditions;
  rc.eta = config.eta ? *config.eta : step_size_bound(problem, config.delta);
  rc.w0 = config.w0 ? *config.w0 : seeded_initialization(problem, config.seed);
  if (rc.w0.size() != problem.dimension) {
    throw InvalidInput("w0 has dimension " + std::to_string(rc.w0.size()) + ", problem needs " +
                       std::to_string(problem.dimension));
  }
  resolve_epsilons(problem, rc);
  return rc;
}

std::vector<RunResult> execute(const ExperimentConfig& config) {
  const ProblemInstance problem = make_problem(config.problem_id);
  std::vector<Algorithm> algorithms;
  for (const auto& id : config.algorithm_ids) algorithms.push_back(make_algorithm(id));
  const RunConfig rc = resolve_run_config(config, problem);
  std::vector<RunResult> results;
  for (const auto& algo : algorithms) {
    RunResult r;
    r.algorithm_id = algo.id;
    try {
      r.trace = algo.run(problem, rc);
    } catch (const PreconditionViolation& e) {
      r.error = e.what();
      results.push_back(std::move(r));
      continue;
    }
    if (!config.eta) r.trace.config_snapshot["eta_mode"] = "auto";
    r.audit = audit_trace(problem, r.trace, rc);
    r.label = classify_defections(problem, r.trace);
    r.final_loss = average_loss(problem, final_point(r.trace));
    results.push_back(std::move(r));
  }
  return results;
}

std::string comparison_csv(const std::vector<RunResult>& results) {
  std::ostringstream out;
  out << "round";
  std::size_t rows = 0;
  for (const auto& r : results) {
    const std::size_t m = r.trace.epsilons.size();
    out << ',' << r.algorithm_id << ":F_avg";
    for (std::size_t i = 0; i < m; ++i) out << ',' << r.algorithm_id << ":loss_agent_" << i;
    out << ',' << r.algorithm_id << ":defections";
    rows = std::max(rows, r.trace.rounds.size());
  }
  out << '\n';
  for (std::size_t k = 0; k < rows; ++k) {
    out << k + 1;
    for (const auto& r : results) {
      const std::size_t m = r.trace.epsilons.size();
      if (k < r.trace.rounds.size()) {
        const auto& rec = r.trace.rounds[k];
        out << ',' << format_double(rec.average_loss);
        for (double l : rec.per_agent_loss) out << ',' << format_double(l);
        out << ',';
        for (std::size_t i = 0; i < rec.defections.size(); ++i) {
          out << (i ? ";" : "") << rec.defections[i];
        }
      } else {
        out << std::string(m + 2, ',');
      }
    }
    out << '\n';
  }
  return out.str();
}

namespace {

// Executes the config and queues per-run files. Returns an exit code on
// input errors, otherwise nullopt.
std::optional<int> run_all(const ExperimentConfig& config, std::vector<RunResult>& results,
                           FileSet& files, std::ostream& err) {
  try {
    results = execute(config);
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return kExitBadInput;
  }
  const auto names = dir_names(results);
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].error.empty()) {
      add_run_files(files, config.out_dir / names[i], results[i], config.outputs);
    }
  }
  return std::nullopt;
}

int completion_code(const std::vector<RunResult>& results) {
  const bool all_ran = std::all_of(results.begin(), results.end(),
                                   [](const RunResult& r) { return r.error.empty(); });
  return all_ran ? kExitOk : kExitRunFailed;
}

}  // namespace

int cmd_run(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
  std::vector<RunResult> results;
  FileSet files;
  if (auto rc = run_all(config, results, files, err)) return *rc;
  files.emplace_back(config.out_dir / "summary.json", summary_json(results).dump(2) + "\n");
  if (const int rc = write_all(files, err); rc != kExitOk) return rc;
  print_summary(results, out);
  return completion_code(results);
}

int cmd_check(const std::string& problem_id, std::ostream& out, std::ostream& err) {
  ProblemInstance problem;
  try {
    problem = make_problem(problem_id);
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return kExitBadInput;
  }
  const AssumptionReport report = validate_assumptions(problem);
  out << "problem " << problem.id << " (M=" << problem.num_agents()
      << ", d=" << problem.dimension << ")\n";
  for (const auto& c : report.checks) {
    out << "  " << (c.passed ? "PASS" : "FAIL") << "  " << c.name
        << "  worst=" << format_double(c.worst_violation);
    if (!c.detail.empty()) out << "  " << c.detail;
    out << "\n";
  }
  if (!report.get("independence").passed) {
    out << "warning: agent gradients are linearly dependent at some sampled points; "
           "projection-based aggregation may halt there\n";
  }
  return report.basic_assumptions_hold() ? kExitOk : kExitRunFailed;
}

int cmd_compare(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
  if (config.algorithm_ids.size() < 2) {
    err << "error: compare needs at least two algorithms\n";
    return kExitBadInput;
  }
  std::vector<RunResult> results;
  FileSet files;
  if (auto rc = run_all(config, results, files, err)) return *rc;
  std::vector<RunResult> ran;
  for (const auto& r : results) {
    if (r.error.empty()) ran.push_back(r);
  }
  json summary = summary_json(results);
  json deltas = json::array();
  for (std::size_t i = 1; i < ran.size(); ++i) {
    deltas.push_back({{"algorithm", ran[i].algorithm_id},
                      {"reference", ran[0].algorithm_id},
                      {"final_F_delta", ran[i].final_loss - ran[0].final_loss}});
  }
  summary["final_F_delta"] = deltas;
  files.emplace_back(config.out_dir / "summary.json", summary.dump(2) + "\n");
  if (config.outputs.count("csv")) {
    files.emplace_back(config.out_dir / "compare.csv", comparison_csv(ran));
  }
  if (config.outputs.count("svg") && !ran.empty()) {
    LineChart chart;
    chart.title = ran.front().trace.problem_id + ": F by round";
    for (const auto& r : ran) {
      ChartSeries s;
      s.name = r.algorithm_id;
      for (const auto& rec : r.trace.rounds) {
        s.x.push_back(rec.round);
        s.y.push_back(rec.average_loss);
        if (!rec.defections.empty()) s.markers.push_back(rec.round);
      }
      chart.series.push_back(std::move(s));
    }
    files.emplace_back(config.out_dir / "compare.svg", render_svg(chart));
  }
  if (const int rc = write_all(files, err); rc != kExitOk) return rc;
  print_summary(results, out);
  for (const auto& d : deltas) {
    out << "final F delta (" << d["algorithm"].get<std::string>() << " - "
        << d["reference"].get<std::string>() << "): "
        << format_double(d["final_F_delta"].get<double>()) << "\n";
  }
  return completion_code(results);
}

int cmd_probe(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
  json report;
  std::string csv;
  try {
    const ProblemInstance problem = make_problem(config.problem_id);
    std::vector<Algorithm> algorithms;
    for (const auto& id : config.algorithm_ids) algorithms.push_back(make_algorithm(id));
    ExperimentConfig c = config;
    RunConfig rc;
    if (config.probe.mode == "grid") {
      if (problem.dimension != 2) throw InvalidInput("grid probe needs a 2-d problem");
      if (!c.w0) c.w0 = problem.shared_optimum;  // placeholder; each grid point overrides it
      rc = resolve_run_config(c, problem);
      const auto probe = probe_bad_region(
          problem, square_grid(config.probe.lo, config.probe.hi, config.probe.n), algorithms, rc);
      json pts = json::array();
      std::ostringstream rows;
      rows << "w0_x,w0_y,starts_in_solution_set";
      for (const auto& id : probe.algorithm_ids) rows << ',' << id << ":label," << id << ":F_final";
      rows << ",empirically_bad\n";
      int bad = 0;
      for (const auto& p : probe.points) {
        json labels = json::array();
        rows << format_double(p.w0[0]) << ',' << format_double(p.w0[1]) << ','
             << (p.starts_in_solution_set ? "true" : "false");
        for (std::size_t i = 0; i < p.labels.size(); ++i) {
          labels.push_back(std::string(to_string(p.labels[i])));
          rows << ',' << to_string(p.labels[i]) << ',' << format_double(p.final_loss[i]);
        }
        rows << ',' << (p.empirically_bad ? "true" : "false") << '\n';
        bad += p.empirically_bad;
        pts.push_back({{"w0", {p.w0[0], p.w0[1]}},
                       {"starts_in_solution_set", p.starts_in_solution_set},
                       {"labels", labels},
                       {"final_F", p.final_loss},
                       {"empirically_bad", p.empirically_bad}});
      }
      report = {{"mode", "grid"},      {"problem", problem.id},
                {"algorithms", probe.algorithm_ids}, {"points", pts},
                {"empirically_bad_count", bad},     {"note", probe.note}};
      csv = rows.str();
      out << "grid probe: " << bad << " of " << probe.points.size()
          << " points empirically bad\nnote: " << probe.note << "\n";
    } else {
      rc = resolve_run_config(c, problem);
      json algos = json::array();
      std::ostringstream rows;
      rows << "algorithm,c,eta,label,F_final,outcome\n";
      for (const auto& algo : algorithms) {
        const auto probe = probe_step_scaling(problem, algo, rc, config.probe.max_exponent);
        json trials = json::array();
        for (const auto& t : probe.trials) {
          trials.push_back({{"c", t.c},
                            {"eta", t.eta},
                            {"label", std::string(to_string(t.label))},
                            {"final_F", t.final_loss},
                            {"outcome", std::string(to_string(t.outcome))}});
          rows << algo.id << ',' << format_double(t.c) << ',' << format_double(t.eta) << ','
               << to_string(t.label) << ',' << format_double(t.final_loss) << ','
               << to_string(t.outcome) << '\n';
        }
        algos.push_back({{"algorithm", algo.id},
                         {"trials", trials},
                         {"first_harmful_c",
                          probe.first_harmful_c ? json(*probe.first_harmful_c) : json(nullptr)}});
        out << algo.id << ": first harmful c = "
            << (probe.first_harmful_c ? format_double(*probe.first_harmful_c) : "none") << "\n";
      }
      report = {{"mode", "scaling"}, {"problem", problem.id}, {"base_eta", rc.eta},
                {"runs", algos}};
      csv = rows.str();
    }
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return kExitBadInput;
  }
  FileSet files;
  files.emplace_back(config.out_dir / "probe.json", report.dump(2) + "\n");
  if (config.outputs.count("csv")) files.emplace_back(config.out_dir / "probe.csv", csv);
  return write_all(files, err);
}

}  // namespace defectsim
