#pragma once

// Execution engine for intermittently communicating first-order algorithms
// with rational agents: the generic round loop, uniform aggregation, FedAvg
// with local steps, and the defection-aware projected aggregation (ADA-GD).

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "defectsim/core.hpp"
#include "defectsim/linalg.hpp"

namespace defectsim {

struct AggregationRule {
  enum class Kind { UniformMean, WeightedUniform, AdaGd };
  Kind kind = Kind::UniformMean;
  // Scalar weight nu({O_m}) applied to every surviving gradient.
  std::function<double(std::span<const OracleOutput>)> weight;

  static AggregationRule uniform_mean();
  static AggregationRule weighted_uniform(std::function<double(std::span<const OracleOutput>)> nu);
  static AggregationRule ada_gd();

  /// h = nu / |M_r| * sum of gradients. Only valid for the uniform kinds.
  [[nodiscard]] Point aggregate(std::span<const OracleOutput> outputs) const;
};

struct RunConfig {
  double eta = 0.01;
  // Empty: the problem's precisions. One entry: shared by every agent.
  std::vector<double> epsilons;
  double delta = 0.05;
  long max_rounds = 1'000'000;
  Point w0;
  double rank_tol = kDefaultRankTol;
  std::uint64_t seed = 0;
  // When false, ADA-GD runs even if w0 or delta violate its preconditions.
  bool enforce_preconditions = true;
};

std::vector<double> resolve_epsilons(const ProblemInstance& problem, const RunConfig& config);

std::map<std::string, std::string> config_snapshot(const RunConfig& config);
RunConfig config_from_snapshot(const std::map<std::string, std::string>& snapshot);

/// min(delta / L, sqrt(delta / (2H)), 1 / (M H)).
double step_size_bound(double delta, double lipschitz, double smoothness, int num_agents);
/// Same, using the problem's largest declared L and H.
double step_size_bound(const ProblemInstance& problem, double delta);

struct PredictedSets {
  AgentSet defecting;
  AgentSet non_defecting;
};

/// Index i is predicted defecting iff value_i - eta * |grad_i| <= eps_i + delta.
PredictedSets predict_sets(std::span<const OracleOutput> outputs, double eta,
                           std::span<const double> epsilons, double delta);

struct StepResult {
  enum class Kind { Update, Terminate };
  Kind kind = Kind::Update;
  CaseLabel case_label = CaseLabel::NoneDefecting;
  Point direction;  // Update: g_t with |g_t| <= 1
  Point point;      // Terminate: returned model
  PredictedSets sets;  // agent ids
};

/// One ADA-GD aggregation at w over the active agents. Throws DegenerateUpdate
/// if the normalizing denominator is below config.rank_tol.
StepResult ada_gd_step(const ProblemInstance& problem, const Point& w, const AgentSet& active,
                       const RunConfig& config);

/// Same, from oracle outputs already computed for every agent at w.
StepResult ada_gd_step(std::span<const OracleOutput> all_outputs, const Point& w,
                       const AgentSet& active, std::span<const double> epsilons,
                       const RunConfig& config);

Trace run_ada_gd(const ProblemInstance& problem, const RunConfig& config);

Trace run_icfo(const AggregationRule& rule, const ProblemInstance& problem,
               const RunConfig& config);

struct FedAvgOptions {
  int local_steps = 1;      // K
  bool stochastic = false;  // sample one datapoint per local step
};

Trace run_fedavg(const ProblemInstance& problem, const FedAvgOptions& options,
                 const RunConfig& config);

struct Algorithm {
  std::string id;
  std::function<Trace(const ProblemInstance&, const RunConfig&)> run;
};

/// "ada-gd", "uniform-gd", "fedavg:K=<k>[,stochastic]".
Algorithm make_algorithm(std::string_view id);

}  // namespace defectsim
