#include "defectsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "defectsim/linalg.hpp"

namespace defectsim {

bool AuditReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const AuditCheck& c) { return !c.applicable || c.passed; });
}

const AuditCheck& AuditReport::get(std::string_view name) const {
  for (const auto& c : checks) {
    if (c.name == name) return c;
  }
  throw InvalidInput("no audit check named " + std::string(name));
}

bool AuditReport::has(std::string_view name) const {
  return std::any_of(checks.begin(), checks.end(),
                     [&](const AuditCheck& c) { return c.name == name; });
}

namespace {

bool is_ada_round(const RoundRecord& r) {
  return r.case_label == CaseLabel::Mixed || r.case_label == CaseLabel::NoneDefecting ||
         r.case_label == CaseLabel::AllDefecting;
}

// Records a violation of size v (> 0 means failing) at round r.
void note_violation(AuditCheck& check, double v, int round) {
  if (v > 0.0 || std::isnan(v)) {
    if (check.passed) check.round = round;
    check.passed = false;
  }
  if (std::isnan(v)) {
    check.worst_violation = v;
  } else if (!std::isnan(check.worst_violation)) {
    check.worst_violation = std::max(check.worst_violation, v);
  }
}

std::vector<double> epsilons_for(const ProblemInstance& problem, const Trace& trace,
                                 const RunConfig& config) {
  if (trace.epsilons.size() == static_cast<std::size_t>(problem.num_agents())) {
    return trace.epsilons;
  }
  return resolve_epsilons(problem, config);
}

}  // namespace

AuditCheck audit_no_defection(const Trace& trace) {
  AuditCheck check;
  check.name = "no_defection";
  for (const auto& r : trace.rounds) {
    if (!r.defections.empty()) {
      note_violation(check, static_cast<double>(r.defections.size()), r.round);
    }
  }
  check.worst_violation = trace.total_defections();
  if (trace.rounds.empty()) check.note = "vacuous: no rounds";
  return check;
}

AuditCheck audit_prediction_soundness(const ProblemInstance& problem, const Trace& trace,
                                      const RunConfig& config) {
  AuditCheck check;
  check.name = "prediction_soundness";
  const auto eps = epsilons_for(problem, trace, config);
  const double eta = config.eta;
  const double delta = config.delta;
  int evaluated = 0;
  int skipped = 0;
  for (const auto& r : trace.rounds) {
    if (!is_ada_round(r)) continue;
    auto ahead = [&](int m, bool& ok) {
      const OracleOutput o = evaluate_oracle(problem.agents[m], r.iterate);
      const double n = o.gradient.norm();
      if (n == 0.0) {
        ok = false;
        return 0.0;
      }
      ok = true;
      return evaluate_oracle(problem.agents[m], r.iterate - eta * (o.gradient / n)).value;
    };
    for (int m : r.predicted_defecting) {
      bool ok = false;
      const double f = ahead(m, ok);
      if (!ok) {
        ++skipped;
        continue;
      }
      ++evaluated;
      note_violation(check, f - (eps[m] + 2.0 * delta) - kSoundnessTol, r.round);
    }
    for (int m : r.predicted_non_defecting) {
      bool ok = false;
      const double f = ahead(m, ok);
      if (!ok) {
        ++skipped;
        continue;
      }
      ++evaluated;
      // Must be strictly above eps + delta; equality counts as a violation.
      const double margin = f - (eps[m] + delta);
      note_violation(check, margin > -kSoundnessTol ? 0.0 : -margin, r.round);
    }
  }
  if (evaluated == 0) check.note = "vacuous: no agent with a nonzero gradient to check";
  if (skipped > 0) {
    check.note += (check.note.empty() ? "" : "; ") + std::to_string(skipped) +
                  " zero-gradient entries skipped";
  }
  const double h = problem.max_smoothness();
  if (h > 0.0 && eta > std::sqrt(2.0 * delta / h)) {
    check.note += (check.note.empty() ? "" : "; ") +
                  std::string("eta exceeds sqrt(2 delta / H); bounds not guaranteed");
  }
  return check;
}

AuditCheck audit_progress(const ProblemInstance& problem, const Trace& trace) {
  AuditCheck check;
  check.name = "progress";
  int evaluated = 0;
  for (const auto& r : trace.rounds) {
    if (r.case_label != CaseLabel::Mixed && r.case_label != CaseLabel::NoneDefecting) continue;
    if (!r.update_direction) continue;
    const double before = average_loss(problem, r.iterate);
    const double after = average_loss(problem, r.iterate + r.step * *r.update_direction);
    ++evaluated;
    // Strict decrease required: a tie is a violation of size 0 that still fails.
    if (!(after < before)) {
      if (check.passed) check.round = r.round;
      check.passed = false;
    }
    check.worst_violation = std::max(check.worst_violation, after - before);
  }
  if (evaluated == 0) check.note = "vacuous: no Mixed or NoneDefecting update";
  return check;
}

AuditCheck audit_final_quality(const ProblemInstance& problem, const Trace& trace,
                               const RunConfig& config) {
  AuditCheck check;
  check.name = "final_quality";
  if (trace.outcome.kind != OutcomeKind::Returned) {
    check.applicable = false;
    check.note = "not applicable: outcome " + std::string(to_string(trace.outcome.kind));
    return check;
  }
  const auto eps = epsilons_for(problem, trace, config);
  const double bound = *std::max_element(eps.begin(), eps.end()) + 3.0 * config.delta;
  const double f = average_loss(problem, final_point(trace));
  const int last = trace.rounds.empty() ? 0 : trace.rounds.back().round;
  note_violation(check, f - bound - kQualityTol, last);
  check.worst_violation = f - bound;
  check.note = "F(w_hat) = " + format_double(f) + ", bound " + format_double(bound);
  return check;
}

AuditCheck audit_orthogonality(const ProblemInstance& problem, const Trace& trace) {
  AuditCheck check;
  check.name = "orthogonality";
  int evaluated = 0;
  for (const auto& r : trace.rounds) {
    if (r.case_label != CaseLabel::Mixed || !r.update_direction) continue;
    for (int m : r.predicted_defecting) {
      const Point g = evaluate_oracle(problem.agents[m], r.iterate).gradient;
      ++evaluated;
      const double inner = std::abs(g.dot(*r.update_direction));
      note_violation(check, inner - kOrthogonalityTol * g.norm(), r.round);
    }
  }
  if (evaluated == 0) check.note = "vacuous: no Mixed update";
  return check;
}

AuditCheck audit_clamp(const Trace& trace) {
  AuditCheck check;
  check.name = "clamp";
  int evaluated = 0;
  for (const auto& r : trace.rounds) {
    if (!is_ada_round(r) || !r.update_direction) continue;
    ++evaluated;
    note_violation(check, r.update_direction->norm() - (1.0 + kClampTol), r.round);
  }
  if (evaluated == 0) check.note = "vacuous: no ADA-GD update";
  return check;
}

AuditCheck audit_span_membership(const ProblemInstance& problem, const Trace& trace) {
  AuditCheck check;
  check.name = "span_membership";
  const bool local_steps =
      trace.algorithm_id.rfind("fedavg", 0) == 0 && trace.algorithm_id != "fedavg:K=1";
  if (local_steps) {
    check.applicable = false;
    check.note = "not applicable: local steps leave the span of round gradients";
    return check;
  }
  int evaluated = 0;
  for (const auto& r : trace.rounds) {
    if (!r.update_direction) continue;
    std::vector<Point> received;
    for (int m : r.active) received.push_back(evaluate_oracle(problem.agents[m], r.iterate).gradient);
    const Point& dir = *r.update_direction;
    const Point residual = project_complement(dir, received);
    ++evaluated;
    note_violation(check, residual.norm() - 1e-8 * std::max(1.0, dir.norm()), r.round);
  }
  if (evaluated == 0) check.note = "vacuous: no update";
  return check;
}

AuditCheck audit_defection_permanence(const Trace& trace) {
  AuditCheck check;
  check.name = "defection_permanence";
  std::set<int> gone;
  for (const auto& r : trace.rounds) {
    for (int m : r.defections) {
      if (!gone.insert(m).second) note_violation(check, 1.0, r.round);
    }
    for (int m : r.active) {
      if (gone.count(m)) note_violation(check, 1.0, r.round);
    }
  }
  return check;
}

AuditReport audit_trace(const ProblemInstance& problem, const Trace& trace,
                        const RunConfig& config) {
  AuditReport report;
  report.checks.push_back(audit_no_defection(trace));
  report.checks.push_back(audit_prediction_soundness(problem, trace, config));
  report.checks.push_back(audit_progress(problem, trace));
  report.checks.push_back(audit_final_quality(problem, trace, config));
  report.checks.push_back(audit_orthogonality(problem, trace));
  report.checks.push_back(audit_clamp(trace));
  report.checks.push_back(audit_span_membership(problem, trace));
  report.checks.push_back(audit_defection_permanence(trace));
  return report;
}

AuditReport audit_trace(const ProblemInstance& problem, const Trace& trace) {
  return audit_trace(problem, trace, config_from_snapshot(trace.config_snapshot));
}

std::string_view to_string(DefectionLabel label) {
  switch (label) {
    case DefectionLabel::NoDefection:
      return "NoDefection";
    case DefectionLabel::Benign:
      return "Benign";
    case DefectionLabel::Harmful:
      return "Harmful";
  }
  return "?";
}

Point final_point(const Trace& trace) {
  if (trace.outcome.point.size() > 0) return trace.outcome.point;
  if (!trace.rounds.empty()) return trace.rounds.back().iterate;
  throw InvalidInput("final_point: empty trace without an outcome point");
}

DefectionLabel classify_defections(const ProblemInstance& problem, const Trace& trace) {
  if (trace.total_defections() == 0) return DefectionLabel::NoDefection;
  const Point w = final_point(trace);
  const auto eps = trace.epsilons.size() == static_cast<std::size_t>(problem.num_agents())
                       ? trace.epsilons
                       : problem.precisions;
  for (int m = 0; m < problem.num_agents(); ++m) {
    const double f = evaluate_oracle(problem.agents[m], w).value;
    if (!(f <= eps[m] + kHarmTol + problem.sublevel_allowance)) return DefectionLabel::Harmful;
  }
  return DefectionLabel::Benign;
}

BadRegionProbe probe_bad_region(const ProblemInstance& problem, const std::vector<Point>& grid,
                                const std::vector<Algorithm>& algorithms,
                                const RunConfig& config) {
  BadRegionProbe probe;
  for (const auto& a : algorithms) probe.algorithm_ids.push_back(a.id);
  probe.note =
      "empirically bad = Harmful under every probed algorithm at this step size; an "
      "under-approximation, since a bad region must defeat every ICFO algorithm at every "
      "step size";
  const auto eps = resolve_epsilons(problem, config);
  for (const auto& w0 : grid) {
    ProbePoint pt;
    pt.w0 = w0;
    pt.starts_in_solution_set = true;
    for (int m = 0; m < problem.num_agents(); ++m) {
      if (!wants_to_defect(evaluate_oracle(problem.agents[m], w0).value, eps[m])) {
        pt.starts_in_solution_set = false;
      }
    }
    RunConfig c = config;
    c.w0 = w0;
    c.enforce_preconditions = false;
    for (const auto& algo : algorithms) {
      const Trace t = algo.run(problem, c);
      pt.labels.push_back(classify_defections(problem, t));
      pt.final_loss.push_back(average_loss(problem, final_point(t)));
    }
    pt.empirically_bad =
        !pt.labels.empty() && std::all_of(pt.labels.begin(), pt.labels.end(), [](auto l) {
          return l == DefectionLabel::Harmful;
        });
    probe.points.push_back(std::move(pt));
  }
  return probe;
}

std::vector<Point> square_grid(double lo, double hi, int n) {
  if (n < 1 || !(hi >= lo)) throw InvalidInput("square_grid: need n >= 1 and hi >= lo");
  std::vector<Point> grid;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double x = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
      const double y = n == 1 ? lo : lo + (hi - lo) * j / (n - 1);
      Point p(2);
      p << x, y;
      grid.push_back(p);
    }
  }
  return grid;
}

StepScalingProbe probe_step_scaling(const ProblemInstance& problem, const Algorithm& algorithm,
                                    const RunConfig& config, int max_exponent) {
  if (max_exponent < 0) throw InvalidInput("probe_step_scaling: max_exponent must be >= 0");
  StepScalingProbe probe;
  for (int k = 0; k <= max_exponent; ++k) {
    ScalingTrial trial;
    trial.c = std::ldexp(1.0, -k);
    trial.eta = trial.c * config.eta;
    RunConfig c = config;
    c.eta = trial.eta;
    const Trace t = algorithm.run(problem, c);
    trial.label = classify_defections(problem, t);
    trial.final_loss = average_loss(problem, final_point(t));
    trial.outcome = t.outcome.kind;
    probe.trials.push_back(trial);
    if (trial.label == DefectionLabel::Harmful) {
      probe.first_harmful_c = trial.c;
      break;
    }
  }
  return probe;
}

double derive_alpha_prime(const Point& defection_point, double epsilon, double mu) {
  if (defection_point.size() != 2) throw InvalidInput("derive_alpha_prime: need a 2-d point");
  const double alpha_max = epsilon + mu / 2.0 - (defection_point[0] - defection_point[1]);
  if (!(alpha_max > 0.0)) {
    throw InvalidInput("derive_alpha_prime: defection point leaves no room for a shift");
  }
  return alpha_max / 2.0;
}

}  // namespace defectsim
