#include <doctest.h>

#include <set>

#include "defectsim/analysis.hpp"
#include "defectsim/problems.hpp"
#include "defectsim/trace_io.hpp"
#include "helpers.hpp"

using namespace defectsim;

namespace {

ProblemInstance one_d_half_square() {
  ProblemInstance p;
  p.dimension = 1;
  p.agents.push_back(half_square(pt({0})));
  p.precisions = {0.04};
  p.shared_optimum = pt({0});
  return p;
}

Trace quadratic_ada_trace(RunConfig& c) {
  const auto p = make_random_quadratics(2, 3, 1);
  c.epsilons = {0.1};
  c.delta = 0.05;
  c.eta = step_size_bound(p, c.delta);
  c.w0 = seeded_initialization(p, 1);
  return run_ada_gd(p, c);
}

}  // namespace

TEST_CASE("audit_no_defection") {
  RunConfig c;
  CHECK(audit_no_defection(quadratic_ada_trace(c)).passed);

  const auto p = make_bad_region_example(1e-3);
  RunConfig u;
  u.w0 = pt({1, 1});
  u.eta = 0.1;
  const auto t = run_icfo(AggregationRule::uniform_mean(), p, u);
  const auto check = audit_no_defection(t);
  CHECK_FALSE(check.passed);
  CHECK(check.round == 1);

  CHECK(audit_no_defection(Trace{}).passed);
}

TEST_CASE("audit_prediction_soundness on a hand instance") {
  const auto p = one_d_half_square();
  Trace t;
  t.epsilons = {0.04};
  RoundRecord r;
  r.round = 1;
  r.iterate = pt({0.3});
  r.active = {0};
  r.predicted_defecting = {0};
  r.case_label = CaseLabel::AllDefecting;
  t.rounds.push_back(r);
  RunConfig c;
  c.eta = 0.05;
  c.delta = 0.01;
  // 0.045 - 0.05 * 0.3 = 0.03 <= 0.05, so the agent belongs in D
  CHECK(predict_sets(std::vector{OracleOutput{0.045, pt({0.3})}}, 0.05,
                     std::vector<double>{0.04}, 0.01)
            .defecting == AgentSet{0});
  const auto check = audit_prediction_soundness(p, t, c);
  CHECK(check.passed);
  CHECK(check.note.empty());

  // Misfiled as non-defecting: F one step ahead is 0.03125 <= 0.05, a violation.
  t.rounds[0].predicted_defecting.clear();
  t.rounds[0].predicted_non_defecting = {0};
  t.rounds[0].case_label = CaseLabel::NoneDefecting;
  CHECK_FALSE(audit_prediction_soundness(p, t, c).passed);
}

TEST_CASE("audit_prediction_soundness skips zero gradients") {
  const auto p = one_d_half_square();
  Trace t;
  t.epsilons = {0.04};
  RoundRecord r;
  r.round = 1;
  r.iterate = pt({0});
  r.active = {0};
  r.predicted_defecting = {0};
  r.case_label = CaseLabel::AllDefecting;
  t.rounds.push_back(r);
  RunConfig c;
  c.eta = 0.05;
  c.delta = 0.01;
  const auto check = audit_prediction_soundness(p, t, c);
  CHECK(check.passed);
  CHECK(check.note.find("vacuous") != std::string::npos);
}

TEST_CASE("audit_progress") {
  RunConfig c;
  const auto t = quadratic_ada_trace(c);
  const auto p = make_random_quadratics(2, 3, 1);
  CHECK(audit_progress(p, t).passed);

  Trace reversed = t;
  for (auto& r : reversed.rounds) {
    if (r.update_direction) r.update_direction = -*r.update_direction;
  }
  CHECK_FALSE(audit_progress(p, reversed).passed);

  Trace only_case3;
  RoundRecord r;
  r.round = 1;
  r.iterate = p.shared_optimum;
  r.case_label = CaseLabel::AllDefecting;
  only_case3.rounds.push_back(r);
  CHECK(audit_progress(p, only_case3).passed);
}

TEST_CASE("audit_final_quality") {
  RunConfig c;
  const auto t = quadratic_ada_trace(c);
  const auto p = make_random_quadratics(2, 3, 1);
  CHECK(audit_final_quality(p, t, c).passed);

  Trace capped = t;
  capped.outcome.kind = OutcomeKind::RoundCapReached;
  const auto na = audit_final_quality(p, capped, c);
  CHECK_FALSE(na.applicable);

  // delta = eps turns the bound into 4 eps
  RunConfig same = c;
  same.delta = 0.1;
  Trace at = t;
  at.outcome.point = p.shared_optimum;
  const auto check = audit_final_quality(p, at, same);
  CHECK(check.worst_violation == doctest::Approx(0.0 - 4 * 0.1));
}

TEST_CASE("classify_defections") {
  const auto p = make_bad_region_example(1e-3);
  RunConfig u;
  u.w0 = pt({1, 1});
  u.eta = 0.1;
  CHECK(classify_defections(p, run_icfo(AggregationRule::uniform_mean(), p, u)) ==
        DefectionLabel::Harmful);

  const auto benign = make_benign_example();
  RunConfig b;
  b.w0 = pt({2, 1});
  b.eta = 0.1;
  CHECK(classify_defections(benign, run_icfo(AggregationRule::uniform_mean(), benign, b)) ==
        DefectionLabel::Benign);

  RunConfig c;
  const auto t = quadratic_ada_trace(c);
  const auto label = classify_defections(make_random_quadratics(2, 3, 1), t);
  CHECK(label == DefectionLabel::NoDefection);
  CHECK(audit_no_defection(t).passed);
}

TEST_CASE("probe_bad_region flags only harmful-everywhere points") {
  const auto p = make_bad_region_example(1e-3);
  RunConfig c;
  c.eta = 0.01;
  c.max_rounds = 20000;
  const std::vector<Algorithm> algos{make_algorithm("uniform-gd"), make_algorithm("ada-gd")};
  const auto probe = probe_bad_region(p, {pt({1, 1}), pt({1.05, 0.95}), pt({0, 0})}, algos, c);
  REQUIRE(probe.points.size() == 3);
  CHECK(probe.points[0].empirically_bad);
  CHECK(probe.points[1].empirically_bad);
  CHECK_FALSE(probe.points[2].empirically_bad);
  CHECK(probe.points[2].starts_in_solution_set);
  CHECK(probe.note.find("under-approximation") != std::string::npos);

  const auto benign = make_benign_example();
  const auto bprobe = probe_bad_region(benign, square_grid(-2, 2, 5),
                                       {make_algorithm("uniform-gd")}, c);
  for (const auto& pt_ : bprobe.points) CHECK_FALSE(pt_.empirically_bad);
}

TEST_CASE("re-auditing a stored trace gives the same report") {
  RunConfig c;
  const auto t = quadratic_ada_trace(c);
  const auto p = make_random_quadratics(2, 3, 1);
  const auto first = audit_to_json(audit_trace(p, t, c)).dump();
  const auto reloaded = trace_from_json(nlohmann::json::parse(trace_to_json(t).dump()));
  CHECK(audit_to_json(audit_trace(p, reloaded)).dump() == first);
  CHECK(audit_trace(p, t).all_passed());
}

TEST_CASE("every audit name appears once") {
  RunConfig c;
  const auto report = audit_trace(make_random_quadratics(2, 3, 1), quadratic_ada_trace(c), c);
  std::set<std::string> names;
  for (const auto& ch : report.checks) CHECK(names.insert(ch.name).second);
  CHECK(names.size() == 8);
}

TEST_CASE("derive_alpha_prime") {
  CHECK(derive_alpha_prime(pt({1.0, 1.0}), 0.1, 0.002) == doctest::Approx(0.0505));
  CHECK_THROWS_AS(derive_alpha_prime(pt({2.0, 1.0}), 0.1, 0.002), InvalidInput);
}
