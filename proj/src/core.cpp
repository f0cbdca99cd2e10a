#include "defectsim/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace defectsim {

double ProblemInstance::max_smoothness() const {
  double h = 0.0;
  for (const auto& a : agents) h = std::max(h, a.smoothness);
  return h;
}

double ProblemInstance::max_lipschitz() const {
  double l = 0.0;
  for (const auto& a : agents) l = std::max(l, a.lipschitz);
  return l;
}

bool is_finite(const Point& w) { return w.allFinite(); }

bool is_finite(const OracleOutput& out) {
  return std::isfinite(out.value) && out.gradient.allFinite();
}

OracleOutput evaluate_oracle(const AgentObjective& agent, const Point& w) {
  if (agent.optimum_witness.size() != w.size()) {
    throw InvalidInput("evaluate_oracle: point has dimension " + std::to_string(w.size()) +
                       ", objective '" + agent.name + "' expects " +
                       std::to_string(agent.optimum_witness.size()));
  }
  OracleOutput out = agent.oracle(w);
  if (out.gradient.size() != w.size()) {
    throw InvalidInput("evaluate_oracle: objective '" + agent.name +
                       "' returned a gradient of the wrong dimension");
  }
  return out;
}

std::vector<OracleOutput> evaluate_all(const ProblemInstance& problem, const Point& w) {
  std::vector<OracleOutput> outs;
  outs.reserve(problem.agents.size());
  for (const auto& agent : problem.agents) outs.push_back(evaluate_oracle(agent, w));
  return outs;
}

bool wants_to_defect(double loss, double epsilon) { return loss <= epsilon; }

double average_loss(const ProblemInstance& problem, const Point& w) {
  if (w.size() != problem.dimension) {
    throw InvalidInput("average_loss: dimension mismatch");
  }
  double sum = 0.0;
  for (const auto& agent : problem.agents) sum += evaluate_oracle(agent, w).value;
  return sum / static_cast<double>(problem.agents.size());
}

void validate_problem(const ProblemInstance& problem) {
  if (problem.dimension <= 0) throw InvalidInput("problem dimension must be positive");
  if (problem.agents.empty()) throw InvalidInput("problem needs at least one agent");
  if (problem.precisions.size() != problem.agents.size()) {
    throw InvalidInput("problem needs one precision per agent");
  }
  for (double eps : problem.precisions) {
    if (!(eps > 0.0)) throw InvalidInput("precisions must be positive");
  }
  if (problem.shared_optimum.size() != problem.dimension) {
    throw InvalidInput("shared optimum has the wrong dimension");
  }
  for (const auto& agent : problem.agents) {
    if (agent.optimum_witness.size() != problem.dimension) {
      throw InvalidInput("agent '" + agent.name + "' has the wrong dimension");
    }
    if (evaluate_oracle(agent, agent.optimum_witness).value > 1e-9 ||
        evaluate_oracle(agent, problem.shared_optimum).value > 1e-9) {
      throw InvalidInput("agent '" + agent.name + "' is not minimized at the shared optimum");
    }
  }
}

namespace {

constexpr std::string_view kCaseNames[] = {"Mixed", "NoneDefecting", "AllDefecting",
                                           "BaselineRound"};
constexpr std::string_view kOutcomeNames[] = {"Returned", "RoundCapReached", "Halted"};

}  // namespace

std::string_view to_string(CaseLabel label) { return kCaseNames[static_cast<int>(label)]; }

CaseLabel case_label_from_string(std::string_view text) {
  for (int i = 0; i < 4; ++i) {
    if (kCaseNames[i] == text) return static_cast<CaseLabel>(i);
  }
  throw InvalidInput("unknown case label: " + std::string(text));
}

std::string_view to_string(OutcomeKind kind) { return kOutcomeNames[static_cast<int>(kind)]; }

OutcomeKind outcome_kind_from_string(std::string_view text) {
  for (int i = 0; i < 3; ++i) {
    if (kOutcomeNames[i] == text) return static_cast<OutcomeKind>(i);
  }
  throw InvalidInput("unknown outcome kind: " + std::string(text));
}

void AgentState::defect(int round) {
  if (!active) return;
  active = false;
  defected_at_round = round;
}

AgentSet Trace::defected_agents() const {
  AgentSet out;
  for (const auto& r : rounds) out.insert(out.end(), r.defections.begin(), r.defections.end());
  std::sort(out.begin(), out.end());
  return out;
}

int Trace::total_defections() const {
  int n = 0;
  for (const auto& r : rounds) n += static_cast<int>(r.defections.size());
  return n;
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(std::string_view text) {
  // strtod handles inf/nan spellings that from_chars may reject on older libstdc++.
  std::string s(text);
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw InvalidInput("not a number: " + s);
  return v;
}

std::string format_point(const Point& w) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (i) out += ",";
    out += format_double(w[i]);
  }
  return out + "]";
}

Point parse_point(std::string_view text) {
  std::string s(text);
  if (s.size() < 2 || s.front() != '[' || s.back() != ']') {
    throw InvalidInput("point must look like [x,y,...]: " + s);
  }
  std::vector<double> vals;
  std::stringstream ss(s.substr(1, s.size() - 2));
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) vals.push_back(parse_double(item));
  }
  return Eigen::Map<Point>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

ParsedId parse_id(std::string_view id) {
  ParsedId out;
  const auto colon = id.find(':');
  out.name = std::string(id.substr(0, colon));
  if (out.name.empty()) throw InvalidInput("empty id");
  if (colon == std::string_view::npos) return out;
  std::stringstream ss{std::string(id.substr(colon + 1))};
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      out.flags.push_back(item);
    } else {
      out.params[item.substr(0, eq)] = item.substr(eq + 1);
    }
  }
  return out;
}

bool ParsedId::has_flag(std::string_view flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

double ParsedId::number(const std::string& key, double fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : parse_double(it->second);
}

long ParsedId::integer(const std::string& key, long fallback) const {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(it->second, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != it->second.size() || it->second.empty()) {
    throw InvalidInput("'" + key + "' must be an integer in id '" + name + "'");
  }
  return v;
}

void ParsedId::expect_only(std::initializer_list<std::string_view> keys,
                           std::initializer_list<std::string_view> allowed_flags) const {
  for (const auto& [k, v] : params) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw InvalidInput("unknown parameter '" + k + "' for '" + name + "'");
    }
  }
  for (const auto& f : flags) {
    if (std::find(allowed_flags.begin(), allowed_flags.end(), f) == allowed_flags.end()) {
      throw InvalidInput("unknown flag '" + f + "' for '" + name + "'");
    }
  }
}

}  // namespace defectsim
