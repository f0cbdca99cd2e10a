#include "defectsim/trace_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace defectsim {

using nlohmann::json;

namespace {

// JSON has no NaN or infinity; those are stored as strings.
json num(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

double num_from(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return parse_double(j.get<std::string>());
  throw InvalidInput("expected a number in trace JSON");
}

json vec(const Point& p) {
  json a = json::array();
  for (Eigen::Index i = 0; i < p.size(); ++i) a.push_back(num(p[i]));
  return a;
}

Point vec_from(const json& j) {
  Point p(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) p[static_cast<Eigen::Index>(i)] = num_from(j[i]);
  return p;
}

json nums(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

std::vector<double> nums_from(const json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(num_from(x));
  return v;
}

}  // namespace

json trace_to_json(const Trace& trace) {
  json rounds = json::array();
  for (const auto& r : trace.rounds) {
    rounds.push_back({
        {"round", r.round},
        {"iterate", vec(r.iterate)},
        {"losses", nums(r.per_agent_loss)},
        {"F_avg", num(r.average_loss)},
        {"grad_norm", num(r.grad_norm)},
        {"active", r.active},
        {"predicted_defecting", r.predicted_defecting},
        {"predicted_non_defecting", r.predicted_non_defecting},
        {"case", std::string(to_string(r.case_label))},
        {"direction", r.update_direction ? vec(*r.update_direction) : json(nullptr)},
        {"step", num(r.step)},
        {"defections", r.defections},
    });
  }
  return {
      {"problem_id", trace.problem_id},
      {"algorithm_id", trace.algorithm_id},
      {"config", trace.config_snapshot},
      {"epsilons", nums(trace.epsilons)},
      {"rounds", rounds},
      {"outcome",
       {{"kind", std::string(to_string(trace.outcome.kind))},
        {"point", vec(trace.outcome.point)},
        {"reason", trace.outcome.reason},
        {"all_defected", trace.outcome.all_defected}}},
      {"warnings", trace.warnings},
  };
}

Trace trace_from_json(const json& j) {
  try {
    Trace t;
    t.problem_id = j.at("problem_id").get<std::string>();
    t.algorithm_id = j.at("algorithm_id").get<std::string>();
    t.config_snapshot = j.at("config").get<std::map<std::string, std::string>>();
    t.epsilons = nums_from(j.at("epsilons"));
    for (const auto& jr : j.at("rounds")) {
      RoundRecord r;
      r.round = jr.at("round").get<int>();
      r.iterate = vec_from(jr.at("iterate"));
      r.per_agent_loss = nums_from(jr.at("losses"));
      r.average_loss = num_from(jr.at("F_avg"));
      r.grad_norm = num_from(jr.at("grad_norm"));
      r.active = jr.at("active").get<AgentSet>();
      r.predicted_defecting = jr.at("predicted_defecting").get<AgentSet>();
      r.predicted_non_defecting = jr.at("predicted_non_defecting").get<AgentSet>();
      r.case_label = case_label_from_string(jr.at("case").get<std::string>());
      if (!jr.at("direction").is_null()) r.update_direction = vec_from(jr.at("direction"));
      r.step = num_from(jr.at("step"));
      r.defections = jr.at("defections").get<AgentSet>();
      t.rounds.push_back(std::move(r));
    }
    const auto& o = j.at("outcome");
    t.outcome.kind = outcome_kind_from_string(o.at("kind").get<std::string>());
    t.outcome.point = vec_from(o.at("point"));
    t.outcome.reason = o.at("reason").get<std::string>();
    t.outcome.all_defected = o.at("all_defected").get<bool>();
    t.warnings = j.at("warnings").get<std::vector<std::string>>();
    return t;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed trace JSON: ") + e.what());
  }
}

json audit_to_json(const AuditReport& report) {
  json checks = json::array();
  for (const auto& c : report.checks) {
    checks.push_back({
        {"name", c.name},
        {"passed", c.passed},
        {"applicable", c.applicable},
        {"worst_violation", num(c.worst_violation)},
        {"round", c.round ? json(*c.round) : json(nullptr)},
        {"note", c.note},
    });
  }
  return {{"checks", checks}, {"all_passed", report.all_passed()}};
}

AuditReport audit_from_json(const json& j) {
  try {
    AuditReport report;
    for (const auto& jc : j.at("checks")) {
      AuditCheck c;
      c.name = jc.at("name").get<std::string>();
      c.passed = jc.at("passed").get<bool>();
      c.applicable = jc.at("applicable").get<bool>();
      c.worst_violation = num_from(jc.at("worst_violation"));
      if (!jc.at("round").is_null()) c.round = jc.at("round").get<int>();
      c.note = jc.at("note").get<std::string>();
      report.checks.push_back(std::move(c));
    }
    return report;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed audit JSON: ") + e.what());
  }
}

std::string csv_header(int num_agents) {
  std::string h = "round,case,F_avg";
  for (int m = 0; m < num_agents; ++m) h += ",loss_agent_" + std::to_string(m);
  return h + ",grad_norm,defections";
}

std::string trace_to_csv(const Trace& trace) {
  const int m = trace.rounds.empty() ? static_cast<int>(trace.epsilons.size())
                                     : static_cast<int>(trace.rounds.front().per_agent_loss.size());
  std::ostringstream out;
  out << csv_header(m) << '\n';
  for (const auto& r : trace.rounds) {
    out << r.round << ',' << to_string(r.case_label) << ',' << format_double(r.average_loss);
    for (double l : r.per_agent_loss) out << ',' << format_double(l);
    out << ',' << format_double(r.grad_norm) << ',';
    for (std::size_t i = 0; i < r.defections.size(); ++i) {
      if (i) out << ';';
      out << r.defections[i];
    }
    out << '\n';
  }
  return out.str();
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace defectsim
