#pragma once

// Post-hoc auditors over stored traces, defection classification, and
// empirical probes for bad initializations and step-size scaling.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "defectsim/algorithms.hpp"
#include "defectsim/core.hpp"

namespace defectsim {

struct AuditCheck {
  std::string name;
  bool passed = true;
  bool applicable = true;
  double worst_violation = 0.0;
  std::optional<int> round;  // first failing round, if any
  std::string note;
};

struct AuditReport {
  std::vector<AuditCheck> checks;  // each name at most once

  [[nodiscard]] bool all_passed() const;
  [[nodiscard]] const AuditCheck& get(std::string_view name) const;
  [[nodiscard]] bool has(std::string_view name) const;
};

inline constexpr double kSoundnessTol = 1e-9;
inline constexpr double kQualityTol = 1e-9;
inline constexpr double kOrthogonalityTol = 1e-8;
inline constexpr double kClampTol = 1e-12;
inline constexpr double kHarmTol = 1e-9;

AuditCheck audit_no_defection(const Trace& trace);

/// For every predicted set member with nonzero gradient, F_m one normalized
/// step ahead must be <= eps + 2 delta (D) or > eps + delta (ND).
AuditCheck audit_prediction_soundness(const ProblemInstance& problem, const Trace& trace,
                                      const RunConfig& config);

/// F strictly decreases across every Mixed / NoneDefecting update.
AuditCheck audit_progress(const ProblemInstance& problem, const Trace& trace);

/// F(w_hat) <= max eps + 3 delta + 1e-9; not applicable unless Returned.
AuditCheck audit_final_quality(const ProblemInstance& problem, const Trace& trace,
                               const RunConfig& config);

/// |<grad F_m, g>| <= 1e-8 |grad F_m| for m predicted defecting, Mixed rounds.
AuditCheck audit_orthogonality(const ProblemInstance& problem, const Trace& trace);

/// |g| <= 1 + 1e-12 on every ADA-GD update.
AuditCheck audit_clamp(const Trace& trace);

/// Each update direction lies in the span of the gradients received that
/// round. Applies to ADA-GD and uniform rounds; FedAvg with K > 1 is skipped.
AuditCheck audit_span_membership(const ProblemInstance& problem, const Trace& trace);

/// Agents defect at most once and never rejoin.
AuditCheck audit_defection_permanence(const Trace& trace);

/// All of the above. The trace-only overload takes eta/delta from the snapshot.
AuditReport audit_trace(const ProblemInstance& problem, const Trace& trace,
                        const RunConfig& config);
AuditReport audit_trace(const ProblemInstance& problem, const Trace& trace);

enum class DefectionLabel { NoDefection, Benign, Harmful };

std::string_view to_string(DefectionLabel label);

/// The final point of a run: the returned model, or the last iterate.
Point final_point(const Trace& trace);

/// Harmful iff a defection happened and some F_m(w_R) > eps_m + 1e-9 +
/// problem.sublevel_allowance.
DefectionLabel classify_defections(const ProblemInstance& problem, const Trace& trace);

struct ProbePoint {
  Point w0;
  bool starts_in_solution_set = false;
  std::vector<DefectionLabel> labels;  // one per algorithm
  std::vector<double> final_loss;      // F(w_R), one per algorithm
  bool empirically_bad = false;        // Harmful under every probed algorithm
};

struct BadRegionProbe {
  std::vector<std::string> algorithm_ids;
  std::vector<ProbePoint> points;
  std::string note;
};

/// Runs each algorithm from each grid point. ADA-GD preconditions are not
/// enforced here, so grid points inside a sublevel set still get a label.
BadRegionProbe probe_bad_region(const ProblemInstance& problem, const std::vector<Point>& grid,
                                const std::vector<Algorithm>& algorithms,
                                const RunConfig& config);

/// Square grid of (n x n) points spanning [lo, hi]^2 around origin, 2-d only.
std::vector<Point> square_grid(double lo, double hi, int n);

struct ScalingTrial {
  double c = 1.0;
  double eta = 0.0;
  DefectionLabel label = DefectionLabel::NoDefection;
  double final_loss = 0.0;
  OutcomeKind outcome = OutcomeKind::Returned;
};

struct StepScalingProbe {
  std::vector<ScalingTrial> trials;
  std::optional<double> first_harmful_c;
};

/// Tries eta = c * config.eta for c = 1, 1/2, ..., 2^-max_exponent and stops at
/// the first Harmful run.
StepScalingProbe probe_step_scaling(const ProblemInstance& problem, const Algorithm& algorithm,
                                    const RunConfig& config, int max_exponent = 20);

/// Shift for the uniform-aggregation family: with agent 2 defecting at w_d on
/// the unshifted instance, alpha_max = eps + mu/2 - (w_d1 - w_d2) keeps that
/// agent satisfied at w_d; returns alpha_max / 2.
double derive_alpha_prime(const Point& defection_point, double epsilon, double mu);

}  // namespace defectsim
