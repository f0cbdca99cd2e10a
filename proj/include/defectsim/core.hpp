#pragma once

// Shared domain types: first-order oracles, problem instances, agent state
// and the per-round trace records produced by every algorithm.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace defectsim {

using Point = Eigen::VectorXd;

/// Raised when an argument violates an operation's precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a run's documented preconditions (e.g. w0 outside every
/// sublevel set) do not hold and the run was asked to enforce them.
class PreconditionViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an aggregation step would divide by a (numerically) zero norm.
class DegenerateUpdate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OracleOutput {
  double value = 0.0;
  Point gradient;
};

using Oracle = std::function<OracleOutput(const Point&)>;

struct AgentObjective {
  std::string name;
  Oracle oracle;
  double smoothness = 0.0;  // H
  double lipschitz = 0.0;   // L
  Point optimum_witness;
  // Distance from w to the nearest switch between closed-form pieces of the
  // objective. Empty for objectives that are C^2 everywhere.
  std::function<double(const Point&)> kink_distance;
};

struct Sample {
  Point features;
  double label = 0.0;
};

struct LabeledDataset {
  std::vector<Sample> points;
  int owner = 0;
};

/// Pointwise loss f(w; z) used by finite-sum problems.
struct PointwiseLoss {
  std::function<OracleOutput(const Point&, const Sample&)> evaluate;
  std::string name;
};

/// Per-agent datasets backing a finite-sum problem (F_m = mean of f over D_m).
struct FiniteSumData {
  std::vector<LabeledDataset> datasets;
  PointwiseLoss loss;
};

struct ProblemInstance {
  std::string id;
  int dimension = 0;
  std::vector<AgentObjective> agents;
  std::vector<double> precisions;
  Point shared_optimum;
  // Declared Lipschitz constants hold within this radius of shared_optimum.
  double lipschitz_radius = std::numeric_limits<double>::infinity();
  // Extra points worth checking for gradient dependence (catalog-documented).
  std::vector<Point> probe_points;
  // Extra slack on sublevel-set membership when judging harm (2 mu for the
  // smoothed counterexamples, 0 otherwise).
  double sublevel_allowance = 0.0;
  std::shared_ptr<const FiniteSumData> finite_sum;

  [[nodiscard]] int num_agents() const { return static_cast<int>(agents.size()); }
  [[nodiscard]] double max_smoothness() const;
  [[nodiscard]] double max_lipschitz() const;
};

/// Throws InvalidInput unless dimensions, precisions and realizability hold.
void validate_problem(const ProblemInstance& problem);

[[nodiscard]] bool is_finite(const Point& w);
[[nodiscard]] bool is_finite(const OracleOutput& out);

OracleOutput evaluate_oracle(const AgentObjective& agent, const Point& w);

/// Oracle outputs of every agent (active or not) at w.
std::vector<OracleOutput> evaluate_all(const ProblemInstance& problem, const Point& w);

/// Rational agent rule: defect once the received model is satisfactory.
[[nodiscard]] bool wants_to_defect(double loss, double epsilon);

/// F(w) = (1/M) sum_m F_m(w), over all M agents.
double average_loss(const ProblemInstance& problem, const Point& w);

enum class CaseLabel { Mixed, NoneDefecting, AllDefecting, BaselineRound };

std::string_view to_string(CaseLabel label);
CaseLabel case_label_from_string(std::string_view text);

using AgentSet = std::vector<int>;  // sorted agent ids

struct AgentState {
  int id = 0;
  bool active = true;
  std::optional<int> defected_at_round;

  void defect(int round);
};

struct RoundRecord {
  int round = 0;
  Point iterate;  // model broadcast at the start of the round
  std::vector<double> per_agent_loss;
  double average_loss = 0.0;
  double grad_norm = 0.0;  // ||grad F(iterate)|| over all M agents
  AgentSet active;         // participants after this round's defections
  AgentSet predicted_defecting;
  AgentSet predicted_non_defecting;
  CaseLabel case_label = CaseLabel::BaselineRound;
  // next iterate = iterate + step * update_direction
  std::optional<Point> update_direction;
  double step = 0.0;
  AgentSet defections;
};

enum class OutcomeKind { Returned, RoundCapReached, Halted };

std::string_view to_string(OutcomeKind kind);
OutcomeKind outcome_kind_from_string(std::string_view text);

struct Outcome {
  OutcomeKind kind = OutcomeKind::Returned;
  Point point;
  std::string reason;
  bool all_defected = false;
};

struct Trace {
  std::string problem_id;
  std::string algorithm_id;
  std::map<std::string, std::string> config_snapshot;
  std::vector<double> epsilons;  // resolved per-agent precisions
  std::vector<RoundRecord> rounds;
  Outcome outcome;
  std::vector<std::string> warnings;

  [[nodiscard]] AgentSet defected_agents() const;
  [[nodiscard]] int total_defections() const;
};

/// Formats a double with 17 significant digits (round-trips exactly).
std::string format_double(double x);
double parse_double(std::string_view text);

std::string format_point(const Point& w);
Point parse_point(std::string_view text);

/// "name:key=value,flag,..." as used by catalog and algorithm ids.
struct ParsedId {
  std::string name;
  std::map<std::string, std::string> params;
  std::vector<std::string> flags;

  [[nodiscard]] bool has_flag(std::string_view flag) const;
  [[nodiscard]] double number(const std::string& key, double fallback) const;
  [[nodiscard]] long integer(const std::string& key, long fallback) const;
  /// Throws InvalidInput if any param or flag is not in the allowed lists.
  void expect_only(std::initializer_list<std::string_view> keys,
                   std::initializer_list<std::string_view> allowed_flags = {}) const;
};

ParsedId parse_id(std::string_view id);

}  // namespace defectsim
