#include "defectsim/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <utility>

namespace defectsim {

AggregationRule AggregationRule::uniform_mean() { return AggregationRule{}; }

AggregationRule AggregationRule::weighted_uniform(
    std::function<double(std::span<const OracleOutput>)> nu) {
  AggregationRule rule;
  rule.kind = Kind::WeightedUniform;
  rule.weight = std::move(nu);
  return rule;
}

AggregationRule AggregationRule::ada_gd() {
  AggregationRule rule;
  rule.kind = Kind::AdaGd;
  return rule;
}

namespace {

Point mean_of(std::span<const Point> vectors, Eigen::Index dim) {
  Point sum = Point::Zero(dim);
  for (const auto& v : vectors) sum += v;
  return sum / static_cast<double>(vectors.size());
}

}  // namespace

Point AggregationRule::aggregate(std::span<const OracleOutput> outputs) const {
  if (kind == Kind::AdaGd) throw InvalidInput("aggregate: ADA-GD is not a uniform rule");
  if (outputs.empty()) throw InvalidInput("aggregate: no gradients received");
  std::vector<Point> grads;
  grads.reserve(outputs.size());
  for (const auto& o : outputs) grads.push_back(o.gradient);
  const double nu = (kind == Kind::WeightedUniform && weight) ? weight(outputs) : 1.0;
  return nu * mean_of(grads, outputs.front().gradient.size());
}

std::vector<double> resolve_epsilons(const ProblemInstance& problem, const RunConfig& config) {
  const auto m = static_cast<std::size_t>(problem.num_agents());
  std::vector<double> eps;
  if (config.epsilons.empty()) {
    eps = problem.precisions;
  } else if (config.epsilons.size() == 1) {
    eps.assign(m, config.epsilons.front());
  } else if (config.epsilons.size() == m) {
    eps = config.epsilons;
  } else {
    throw InvalidInput("epsilon list must have 1 or M entries");
  }
  for (double e : eps) {
    if (!(e > 0.0)) throw InvalidInput("epsilon must be positive");
  }
  return eps;
}

std::map<std::string, std::string> config_snapshot(const RunConfig& config) {
  std::string eps = "[";
  for (std::size_t i = 0; i < config.epsilons.size(); ++i) {
    if (i) eps += ",";
    eps += format_double(config.epsilons[i]);
  }
  eps += "]";
  return {
      {"eta", format_double(config.eta)},
      {"epsilons", eps},
      {"delta", format_double(config.delta)},
      {"max_rounds", std::to_string(config.max_rounds)},
      {"w0", format_point(config.w0)},
      {"rank_tol", format_double(config.rank_tol)},
      {"seed", std::to_string(config.seed)},
      {"enforce_preconditions", config.enforce_preconditions ? "true" : "false"},
  };
}

RunConfig config_from_snapshot(const std::map<std::string, std::string>& snapshot) {
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = snapshot.find(key);
    if (it == snapshot.end()) throw InvalidInput("config snapshot lacks '" + key + "'");
    return it->second;
  };
  RunConfig c;
  c.eta = parse_double(get("eta"));
  const Point eps = parse_point(get("epsilons"));
  c.epsilons.assign(eps.data(), eps.data() + eps.size());
  c.delta = parse_double(get("delta"));
  c.max_rounds = std::stol(get("max_rounds"));
  c.w0 = parse_point(get("w0"));
  c.rank_tol = parse_double(get("rank_tol"));
  c.seed = std::stoull(get("seed"));
  c.enforce_preconditions = get("enforce_preconditions") == "true";
  return c;
}

double step_size_bound(double delta, double lipschitz, double smoothness, int num_agents) {
  if (!(delta > 0.0) || !(lipschitz > 0.0) || !(smoothness > 0.0) || num_agents <= 0) {
    throw InvalidInput("step_size_bound: all arguments must be positive");
  }
  return std::min({delta / lipschitz, std::sqrt(delta / (2.0 * smoothness)),
                   1.0 / (num_agents * smoothness)});
}

double step_size_bound(const ProblemInstance& problem, double delta) {
  return step_size_bound(delta, problem.max_lipschitz(), problem.max_smoothness(),
                         problem.num_agents());
}

PredictedSets predict_sets(std::span<const OracleOutput> outputs, double eta,
                           std::span<const double> epsilons, double delta) {
  if (!(eta > 0.0) || !(delta > 0.0)) throw InvalidInput("predict_sets: eta, delta must be > 0");
  if (epsilons.size() != outputs.size()) throw InvalidInput("predict_sets: one epsilon per agent");
  PredictedSets sets;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const double predicted = outputs[i].value - eta * outputs[i].gradient.norm();
    if (predicted <= epsilons[i] + delta) {
      sets.defecting.push_back(static_cast<int>(i));
    } else {
      sets.non_defecting.push_back(static_cast<int>(i));
    }
  }
  return sets;
}

StepResult ada_gd_step(std::span<const OracleOutput> all_outputs, const Point& w,
                       const AgentSet& active, std::span<const double> epsilons,
                       const RunConfig& config) {
  std::vector<OracleOutput> outs;
  std::vector<double> eps;
  for (int id : active) {
    outs.push_back(all_outputs[id]);
    eps.push_back(epsilons[id]);
  }
  PredictedSets local = predict_sets(outs, config.eta, eps, config.delta);

  StepResult result;
  for (int i : local.defecting) result.sets.defecting.push_back(active[i]);
  for (int i : local.non_defecting) result.sets.non_defecting.push_back(active[i]);

  if (local.non_defecting.empty()) {
    result.kind = StepResult::Kind::Terminate;
    result.case_label = CaseLabel::AllDefecting;
    result.point = w;
    return result;
  }

  auto clamp_normalize = [&](const Point& v, const char* what) {
    const double n = v.norm();
    if (!(n >= config.rank_tol)) {
      std::ostringstream msg;
      msg << "degenerate update: |" << what << "| = " << n << " below rank_tol "
          << config.rank_tol;
      throw DegenerateUpdate(msg.str());
    }
    return Point(-std::min(n, 1.0) * (v / n));
  };

  if (local.defecting.empty()) {
    std::vector<Point> grads;
    for (const auto& o : outs) grads.push_back(o.gradient);
    result.case_label = CaseLabel::NoneDefecting;
    result.direction = clamp_normalize(mean_of(grads, w.size()), "grad F");
    return result;
  }

  Point nd_sum = Point::Zero(w.size());
  for (int i : local.non_defecting) nd_sum += outs[i].gradient;
  std::vector<Point> d_grads;
  for (int i : local.defecting) d_grads.push_back(outs[i].gradient);
  const Point projected = project_complement(nd_sum, d_grads, config.rank_tol);
  result.case_label = CaseLabel::Mixed;
  if (projected.norm() < config.rank_tol * std::max(1.0, nd_sum.norm())) {
    std::ostringstream msg;
    msg << "degenerate update: projected non-defecting gradient has norm "
        << projected.norm() << " (|grad F_ND| = " << nd_sum.norm()
        << "); gradients are not linearly independent here";
    throw DegenerateUpdate(msg.str());
  }
  result.direction = clamp_normalize(projected, "projected grad F_ND");
  return result;
}

StepResult ada_gd_step(const ProblemInstance& problem, const Point& w, const AgentSet& active,
                       const RunConfig& config) {
  if (w.size() != problem.dimension) throw InvalidInput("ada_gd_step: dimension mismatch");
  if (!is_finite(w)) throw InvalidInput("ada_gd_step: non-finite point");
  const auto outs = evaluate_all(problem, w);
  const auto eps = resolve_epsilons(problem, config);
  return ada_gd_step(outs, w, active, eps, config);
}

namespace {

Trace begin_trace(const ProblemInstance& problem, const RunConfig& config, std::string id) {
  if (config.w0.size() != problem.dimension) throw InvalidInput("w0 has the wrong dimension");
  if (!is_finite(config.w0)) throw InvalidInput("w0 must be finite");
  if (!(config.eta > 0.0)) throw InvalidInput("eta must be positive");
  if (config.max_rounds < 1) throw InvalidInput("max_rounds must be positive");
  Trace trace;
  trace.problem_id = problem.id;
  trace.algorithm_id = std::move(id);
  trace.config_snapshot = config_snapshot(config);
  trace.epsilons = resolve_epsilons(problem, config);
  return trace;
}

// Decides the update for the surviving agents; fills D/ND and the case label
// on the record. Returning std::nullopt ends the run with the iterate.
using Aggregator = std::function<StepResult(std::span<const OracleOutput>, const Point&,
                                            const AgentSet&, RoundRecord&)>;

Trace run_rounds(const ProblemInstance& problem, const RunConfig& config, Trace trace,
                 bool cap_is_natural_end, const Aggregator& aggregate) {
  const int m = problem.num_agents();
  std::vector<AgentState> agents(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) agents[i].id = i;

  Point w = config.w0;
  bool finished = false;
  for (long t = 1; t <= config.max_rounds && !finished; ++t) {
    const auto outs = evaluate_all(problem, w);
    if (!std::all_of(outs.begin(), outs.end(), [](const auto& o) { return is_finite(o); })) {
      trace.outcome = Outcome{OutcomeKind::Halted, w, "non-finite oracle", false};
      return trace;
    }

    RoundRecord rec;
    rec.round = static_cast<int>(t);
    rec.iterate = w;
    Point grad_sum = Point::Zero(w.size());
    double loss_sum = 0.0;
    for (const auto& o : outs) {
      rec.per_agent_loss.push_back(o.value);
      loss_sum += o.value;
      grad_sum += o.gradient;
    }
    rec.average_loss = loss_sum / m;
    rec.grad_norm = (grad_sum / m).norm();

    for (auto& a : agents) {
      if (a.active && wants_to_defect(outs[a.id].value, trace.epsilons[a.id])) {
        a.defect(rec.round);
        rec.defections.push_back(a.id);
      }
      if (a.active) rec.active.push_back(a.id);
    }

    if (rec.active.empty()) {
      rec.case_label = CaseLabel::BaselineRound;
      trace.rounds.push_back(std::move(rec));
      trace.outcome = Outcome{OutcomeKind::Returned, w, "all agents defected", true};
      return trace;
    }

    StepResult step;
    try {
      step = aggregate(outs, w, rec.active, rec);
    } catch (const DegenerateUpdate& e) {
      trace.rounds.push_back(std::move(rec));
      trace.outcome = Outcome{OutcomeKind::Halted, w, e.what(), false};
      return trace;
    }

    if (step.kind == StepResult::Kind::Terminate) {
      trace.rounds.push_back(std::move(rec));
      trace.outcome = Outcome{OutcomeKind::Returned, step.point, "", false};
      finished = true;
      break;
    }
    rec.update_direction = step.direction;
    rec.step = config.eta;
    w = w + config.eta * step.direction;
    trace.rounds.push_back(std::move(rec));
    if (!is_finite(w)) {
      trace.outcome = Outcome{OutcomeKind::Halted, trace.rounds.back().iterate,
                              "non-finite iterate", false};
      return trace;
    }
  }
  if (!finished) {
    trace.outcome = Outcome{
        cap_is_natural_end ? OutcomeKind::Returned : OutcomeKind::RoundCapReached, w, "",
        false};
  }
  return trace;
}

}  // namespace

Trace run_ada_gd(const ProblemInstance& problem, const RunConfig& config) {
  Trace trace = begin_trace(problem, config, "ada-gd");
  const std::vector<double> eps = trace.epsilons;  // trace is moved below
  if (config.enforce_preconditions) {
    const double min_eps = *std::min_element(eps.begin(), eps.end());
    if (!(config.delta > 0.0 && config.delta <= min_eps)) {
      throw PreconditionViolation("ADA-GD needs 0 < delta <= epsilon");
    }
    for (int i = 0; i < problem.num_agents(); ++i) {
      const double v = evaluate_oracle(problem.agents[i], config.w0).value;
      if (wants_to_defect(v, eps[i])) {
        throw PreconditionViolation("ADA-GD needs w0 outside every sublevel set; agent " +
                                    std::to_string(i) + " has F_m(w0) = " + format_double(v));
      }
    }
  } else if (!(config.delta > 0.0)) {
    throw InvalidInput("delta must be positive");
  }

  const bool has_constants = problem.max_lipschitz() > 0.0 && problem.max_smoothness() > 0.0;
  if (has_constants) {
    const double bound = step_size_bound(problem, config.delta);
    trace.config_snapshot["eta_bound"] = format_double(bound);
    if (config.eta > bound) {
      trace.warnings.push_back("eta " + format_double(config.eta) +
                               " exceeds the no-defection step bound " + format_double(bound));
    }
  }

  // The sets are recorded even when the step throws, so compute them first.
  Aggregator recording = [&](std::span<const OracleOutput> outs, const Point& w,
                             const AgentSet& active, RoundRecord& rec) {
    std::vector<OracleOutput> sub;
    std::vector<double> sub_eps;
    for (int id : active) {
      sub.push_back(outs[id]);
      sub_eps.push_back(eps[id]);
    }
    const PredictedSets local = predict_sets(sub, config.eta, sub_eps, config.delta);
    for (int i : local.defecting) rec.predicted_defecting.push_back(active[i]);
    for (int i : local.non_defecting) rec.predicted_non_defecting.push_back(active[i]);
    rec.case_label = local.non_defecting.empty() ? CaseLabel::AllDefecting
                     : local.defecting.empty()   ? CaseLabel::NoneDefecting
                                                 : CaseLabel::Mixed;
    StepResult step = ada_gd_step(outs, w, active, eps, config);
    rec.case_label = step.case_label;
    return step;
  };
  return run_rounds(problem, config, std::move(trace), false, recording);
}

Trace run_icfo(const AggregationRule& rule, const ProblemInstance& problem,
               const RunConfig& config) {
  if (rule.kind == AggregationRule::Kind::AdaGd) return run_ada_gd(problem, config);
  Trace trace = begin_trace(problem, config,
                            rule.kind == AggregationRule::Kind::UniformMean ? "uniform-gd"
                                                                            : "weighted-gd");
  Aggregator aggregate = [&](std::span<const OracleOutput> outs, const Point&,
                             const AgentSet& active, RoundRecord& rec) {
    std::vector<OracleOutput> received;
    for (int id : active) received.push_back(outs[id]);
    rec.case_label = CaseLabel::BaselineRound;
    StepResult step;
    step.case_label = CaseLabel::BaselineRound;
    step.direction = -rule.aggregate(received);
    return step;
  };
  return run_rounds(problem, config, std::move(trace), true, aggregate);
}

Trace run_fedavg(const ProblemInstance& problem, const FedAvgOptions& options,
                 const RunConfig& config) {
  if (options.local_steps < 1) throw InvalidInput("FedAvg needs K >= 1");
  if (options.stochastic && !problem.finite_sum) {
    throw InvalidInput("stochastic FedAvg needs a finite-sum problem with datasets");
  }
  std::string id = "fedavg:K=" + std::to_string(options.local_steps);
  if (options.stochastic) id += ",stochastic";
  Trace trace = begin_trace(problem, config, id);
  trace.config_snapshot["local_steps"] = std::to_string(options.local_steps);
  trace.config_snapshot["stochastic"] = options.stochastic ? "true" : "false";

  std::mt19937_64 rng(config.seed);
  const double k = options.local_steps;
  const double local_eta = config.eta / k;
  Aggregator aggregate = [&](std::span<const OracleOutput> outs, const Point& w,
                             const AgentSet& active, RoundRecord& rec) {
    rec.case_label = CaseLabel::BaselineRound;
    std::vector<Point> displacements;  // (w - w_r^m) / eta, one per survivor
    for (int id : active) {
      Point local = w;
      Point grad_sum = Point::Zero(w.size());
      for (int step = 0; step < options.local_steps; ++step) {
        Point g;
        if (options.stochastic) {
          const auto& pts = problem.finite_sum->datasets[id].points;
          std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
          g = problem.finite_sum->loss.evaluate(local, pts[pick(rng)]).gradient;
        } else if (step == 0) {
          g = outs[id].gradient;
        } else {
          g = evaluate_oracle(problem.agents[id], local).gradient;
        }
        grad_sum += g;
        local -= local_eta * g;
      }
      displacements.push_back(grad_sum / k);
    }
    StepResult step;
    step.case_label = CaseLabel::BaselineRound;
    step.direction = -mean_of(displacements, w.size());
    return step;
  };
  return run_rounds(problem, config, std::move(trace), true, aggregate);
}

Algorithm make_algorithm(std::string_view id) {
  const ParsedId parsed = parse_id(id);
  if (parsed.name == "ada-gd") {
    parsed.expect_only({});
    return {"ada-gd", [](const ProblemInstance& p, const RunConfig& c) { return run_ada_gd(p, c); }};
  }
  if (parsed.name == "uniform-gd") {
    parsed.expect_only({});
    return {"uniform-gd", [](const ProblemInstance& p, const RunConfig& c) {
              return run_icfo(AggregationRule::uniform_mean(), p, c);
            }};
  }
  if (parsed.name == "fedavg") {
    parsed.expect_only({"K"}, {"stochastic"});
    FedAvgOptions options;
    options.local_steps = static_cast<int>(parsed.integer("K", 1));
    options.stochastic = parsed.has_flag("stochastic");
    if (options.local_steps < 1) throw InvalidInput("fedavg needs K >= 1");
    return {std::string(id), [options](const ProblemInstance& p, const RunConfig& c) {
              return run_fedavg(p, options, c);
            }};
  }
  throw InvalidInput("unknown algorithm id: " + std::string(id));
}

}  // namespace defectsim
