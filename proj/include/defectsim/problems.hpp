#pragma once

// Problem catalog: smoothed convex primitives, the counterexample instances,
// seeded random families, the heterogeneity-q data partitioner, and the
// assumption validator.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "defectsim/core.hpp"

namespace defectsim {

inline constexpr double kDefaultSmoothing = 1e-3;
inline constexpr double kDefaultPrecision = 0.1;

/// Huber-smoothed |a^T w|: t^2/(2 mu) for |t| <= mu, |t| - mu/2 otherwise.
/// H = ||a||^2 / mu, L = ||a||.
AgentObjective smooth_abs(const Point& a, double mu, std::string name = "smooth_abs");

/// Smoothed max(a^T w + b, 0): 0 for t <= 0, t^2/(2 mu) on [0, mu], t - mu/2 beyond.
AgentObjective smooth_hinge(const Point& a, double b, double mu,
                            std::string name = "smooth_hinge");

/// Two agents |(0,1)^T w| and |(1,-1)^T w| (smoothed); w0 = (1,1) sits in a bad region.
ProblemInstance make_bad_region_example(double mu = kDefaultSmoothing,
                                        double epsilon = kDefaultPrecision);

/// P_alpha: hinges on (0,1)^T w and (1,-1)^T w + alpha.
ProblemInstance make_uniform_agg_family(double alpha, double mu = kDefaultSmoothing,
                                        double epsilon = kDefaultPrecision);

/// F_1 = |w|^2/2, F_2 = F_1/2: nested sublevel sets, parallel gradients.
ProblemInstance make_benign_example(double epsilon = kDefaultPrecision);

/// Fixed constants of the corridor/ellipse instance built by
/// make_nonhetero_bad_example.
struct CorridorExampleConstants {
  double corridor_half_width = 0.1;
  double ellipse_major = 2.5;
  double ellipse_minor = 0.5;
  double ellipse_angle = 1.0471975511965976;  // 60 degrees
  double curvature = 1.0;                     // kappa
  double tip_overlap = 0.05;                  // ellipse reaches 0.05 into the corridor
  double lipschitz_radius = 10.0;
  Point w0;              // documented initialization
  Point parallel_point;  // a point where both gradients are parallel
  Point center;          // ellipse center
  double base_eta = 0.1;
};

CorridorExampleConstants corridor_example_constants();

/// F_1 a smoothed truncated corridor max(|w_1| - 0.1, 0), F_2 a truncated
/// quadratic around a tilted ellipse whose tip overlaps the corridor. Not
/// minimally heterogeneous: gradients are parallel along a line through the
/// ellipse center.
ProblemInstance make_nonhetero_bad_example(double mu = kDefaultSmoothing,
                                           double epsilon = kDefaultPrecision);

/// F_m(w) = (w - w*)^T A_m (w - w*) / 2 with A_m = B_m^T B_m + 0.1 I.
/// Declared L holds within radius 4 of w*.
ProblemInstance make_random_quadratics(int num_agents, int dimension, std::uint64_t seed,
                                       double epsilon = kDefaultPrecision);

/// D_i' = (1-q) D_i  U  (1/n) pool, after trimming all datasets to equal size.
std::vector<LabeledDataset> partition_heterogeneity(std::span<const LabeledDataset> datasets,
                                                    double q, std::uint64_t seed);

/// Realizable least squares, one shifted feature cloud per agent, mixed with
/// partition_heterogeneity(q). Carries FiniteSumData for stochastic FedAvg.
ProblemInstance make_regression_problem(int num_agents, int dimension, int samples_per_agent,
                                        double q, std::uint64_t seed,
                                        double epsilon = kDefaultPrecision);

/// Finite-sum problem built from per-agent datasets and a pointwise loss.
ProblemInstance make_finite_sum_problem(std::string id, std::vector<LabeledDataset> datasets,
                                        PointwiseLoss loss, const Point& shared_optimum,
                                        double lipschitz_radius, double epsilon);

PointwiseLoss squared_loss();

/// shared optimum + radius * (seeded unit direction); radius doubles until every
/// agent starts outside its sublevel set.
Point seeded_initialization(const ProblemInstance& problem, std::uint64_t seed,
                            double radius = 2.0);

struct AssumptionCheck {
  std::string name;
  bool passed = true;
  double worst_violation = 0.0;
  std::string detail;
};

struct AssumptionReport {
  std::vector<AssumptionCheck> checks;  // convex-smooth, lipschitz, realizable, independence

  [[nodiscard]] bool basic_assumptions_hold() const;  // the first three
  [[nodiscard]] bool all_hold() const;
  [[nodiscard]] const AssumptionCheck& get(std::string_view name) const;
};

AssumptionReport validate_assumptions(const ProblemInstance& problem, int samples = 200,
                                      double box_radius = 3.0, std::uint64_t seed = 0,
                                      double tol = 1e-9);

/// Catalog lookup: "bad-region[:mu=..]", "uniform-agg:alpha=0.3[,mu=..]",
/// "benign", "nonhetero-bad", "quadratic:M=5,d=10,seed=7",
/// "regression:M=3,d=5,n=40,q=0.5,seed=1". Every id accepts eps=<x>.
ProblemInstance make_problem(std::string_view id);

std::vector<std::string> catalog_examples();

}  // namespace defectsim
