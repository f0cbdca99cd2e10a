#include <doctest.h>

#include <cmath>

#include "defectsim/algorithms.hpp"
#include "defectsim/analysis.hpp"
#include "defectsim/problems.hpp"
#include "helpers.hpp"

using namespace defectsim;

namespace {

OracleOutput out(double value, const Point& g) { return OracleOutput{value, g}; }

// A problem whose agents report fixed (value, gradient) pairs everywhere.
ProblemInstance constant_problem(const std::vector<OracleOutput>& outs) {
  ProblemInstance p;
  p.dimension = static_cast<int>(outs.front().gradient.size());
  for (const auto& o : outs) {
    AgentObjective a;
    a.oracle = [o](const Point&) { return o; };
    a.optimum_witness = Point::Zero(p.dimension);
    p.agents.push_back(a);
    p.precisions.push_back(0.1);
  }
  p.shared_optimum = Point::Zero(p.dimension);
  return p;
}

}  // namespace

TEST_CASE("step_size_bound formula") {
  CHECK(step_size_bound(0.1, 1.0, 10.0, 5) == doctest::Approx(0.02));
  CHECK(step_size_bound(0.1, 1.0, 1.0, 2) == doctest::Approx(0.1));
  // sqrt term binding: 4 delta doubles it
  const double a = step_size_bound(0.01, 0.001, 1.0, 1);
  const double b = step_size_bound(0.04, 0.001, 1.0, 1);
  CHECK(a == doctest::Approx(std::sqrt(0.01 / 2.0)));
  CHECK(b == doctest::Approx(2 * a));
  CHECK_THROWS_AS(step_size_bound(0.0, 1, 1, 1), InvalidInput);
  CHECK_THROWS_AS(step_size_bound(0.1, -1, 1, 1), InvalidInput);
  CHECK_THROWS_AS(step_size_bound(0.1, 1, 1, 0), InvalidInput);
}

TEST_CASE("predict_sets examples") {
  const std::vector<double> eps{0.04};
  auto s = predict_sets(std::vector{out(0.045, pt({0.3, 0}))}, 0.05, eps, 0.01);
  CHECK(s.defecting == AgentSet{0});
  s = predict_sets(std::vector{out(10, pt({1, 0}))}, 0.01, std::vector<double>{0.1}, 0.01);
  CHECK(s.non_defecting == AgentSet{0});
  // exact boundary, all values representable: 0.5 - 0.25 = 0.125 + 0.125
  s = predict_sets(std::vector{out(0.5, pt({1, 0}))}, 0.25, std::vector<double>{0.125}, 0.125);
  CHECK(s.defecting == AgentSet{0});
  CHECK_THROWS_AS(predict_sets(std::vector{out(1, pt({1}))}, 0.0, std::vector<double>{0.1}, 0.1),
                  InvalidInput);
}

TEST_CASE("ada_gd_step case 1 projects away the defecting gradient") {
  // agent 0 predicted defecting with gradient (0,1); agent 1 not, gradient (0.3,0.7)
  const auto p = constant_problem({out(0.05, pt({0, 1})), out(5.0, pt({0.3, 0.7}))});
  RunConfig c;
  c.eta = 0.01;
  c.delta = 0.05;
  const auto step = ada_gd_step(p, pt({0, 0}), AgentSet{0, 1}, c);
  REQUIRE(step.kind == StepResult::Kind::Update);
  CHECK(step.case_label == CaseLabel::Mixed);
  CHECK(step.direction[0] == doctest::Approx(-0.3));
  CHECK(std::abs(step.direction[1]) < 1e-15);
  CHECK(step.direction.dot(pt({0, 1})) == doctest::Approx(0.0));
}

TEST_CASE("ada_gd_step case 2 clamps the average gradient") {
  const auto p = constant_problem({out(5.0, pt({3, 4})), out(5.0, pt({3, 4}))});
  RunConfig c;
  const auto step = ada_gd_step(p, pt({0, 0}), AgentSet{0, 1}, c);
  CHECK(step.case_label == CaseLabel::NoneDefecting);
  CHECK(step.direction[0] == doctest::Approx(-0.6));
  CHECK(step.direction[1] == doctest::Approx(-0.8));
  CHECK(step.direction.norm() == doctest::Approx(1.0));
}

TEST_CASE("ada_gd_step case 3 terminates") {
  const auto p = constant_problem({out(0.01, pt({1, 0})), out(0.02, pt({0, 1}))});
  RunConfig c;
  const auto step = ada_gd_step(p, pt({2, 3}), AgentSet{0, 1}, c);
  CHECK(step.kind == StepResult::Kind::Terminate);
  CHECK(step.case_label == CaseLabel::AllDefecting);
  CHECK(step.point == pt({2, 3}));
}

TEST_CASE("ada_gd_step refuses a degenerate projection") {
  const auto p = constant_problem({out(0.05, pt({1, 1})), out(5.0, pt({2, 2}))});
  RunConfig c;
  CHECK_THROWS_AS(ada_gd_step(p, pt({0, 0}), AgentSet{0, 1}, c), DegenerateUpdate);
}

TEST_CASE("uniform aggregation averages the received gradients") {
  const std::vector<OracleOutput> outs{out(1, pt({0, 1})), out(1, pt({1, -1}))};
  CHECK(AggregationRule::uniform_mean().aggregate(outs) == pt({0.5, 0}));
  auto doubled = AggregationRule::weighted_uniform([](auto) { return 2.0; });
  CHECK(doubled.aggregate(outs) == pt({1.0, 0}));
  CHECK_THROWS_AS(AggregationRule::ada_gd().aggregate(outs), InvalidInput);
}

TEST_CASE("run_ada_gd on a random quadratic under the step bound") {
  const auto p = make_random_quadratics(2, 3, 1);
  RunConfig c;
  c.epsilons = {0.1};
  c.delta = 0.05;
  c.eta = step_size_bound(p, c.delta);
  c.w0 = seeded_initialization(p, 1);
  const auto t = run_ada_gd(p, c);
  CHECK(t.outcome.kind == OutcomeKind::Returned);
  CHECK(t.total_defections() == 0);
  CHECK(average_loss(p, t.outcome.point) <= 0.25);
  CHECK(t.warnings.empty());
  for (std::size_t i = 0; i < t.rounds.size(); ++i) CHECK(t.rounds[i].round == int(i) + 1);
}

TEST_CASE("run_ada_gd preconditions") {
  const auto p = make_random_quadratics(2, 3, 1);
  RunConfig c;
  c.w0 = p.shared_optimum;
  CHECK_THROWS_AS(run_ada_gd(p, c), PreconditionViolation);
  c.w0 = seeded_initialization(p, 1);
  c.epsilons = {0.1};
  c.delta = 0.2;
  CHECK_THROWS_AS(run_ada_gd(p, c), PreconditionViolation);
}

TEST_CASE("run_ada_gd stops at the round cap and warns on a large step") {
  const auto p = make_random_quadratics(2, 3, 1);
  RunConfig c;
  c.w0 = seeded_initialization(p, 1);
  c.max_rounds = 1;
  c.eta = 2.0 * step_size_bound(p, c.delta);
  const auto t = run_ada_gd(p, c);
  CHECK(t.outcome.kind == OutcomeKind::RoundCapReached);
  CHECK(t.rounds.size() == 1);
  CHECK(t.warnings.size() == 1);
  CHECK(t.config_snapshot.count("eta_bound") == 1);
}

TEST_CASE("run_ada_gd halts on parallel gradients") {
  const auto p = make_benign_example();
  RunConfig c;
  c.w0 = pt({3, 0});
  c.eta = 0.01;
  const auto t = run_ada_gd(p, c);
  // F2 is predicted to defect first while F1 is not: the projection vanishes.
  CHECK(t.outcome.kind == OutcomeKind::Halted);
  CHECK(t.outcome.reason.find("degenerate") != std::string::npos);
  CHECK(t.total_defections() == 0);
}

TEST_CASE("uniform GD: agent 2 defects at round 1 on the bad-region example") {
  const auto p = make_bad_region_example(1e-3);
  RunConfig c;
  c.w0 = pt({1, 1});
  c.eta = 0.1;
  const auto t = run_icfo(AggregationRule::uniform_mean(), p, c);
  REQUIRE_FALSE(t.rounds.empty());
  CHECK(t.rounds[0].defections == AgentSet{1});
  CHECK(t.rounds[0].case_label == CaseLabel::BaselineRound);
}

TEST_CASE("a non-finite oracle halts the run") {
  ProblemInstance p = make_benign_example();
  p.agents[0].oracle = [](const Point& w) {
    return OracleOutput{std::nan(""), w};
  };
  RunConfig c;
  c.w0 = pt({3, 3});
  const auto t = run_icfo(AggregationRule::uniform_mean(), p, c);
  CHECK(t.outcome.kind == OutcomeKind::Halted);
  CHECK(t.outcome.reason == "non-finite oracle");
}

TEST_CASE("run_icfo with a single agent is plain gradient descent") {
  ProblemInstance p;
  p.dimension = 2;
  p.agents.push_back(half_square(pt({1, -1})));
  p.precisions = {1e-6};
  p.shared_optimum = pt({1, -1});
  RunConfig c;
  c.w0 = pt({4, 2});
  c.eta = 0.1;
  c.max_rounds = 50;
  const auto t = run_icfo(AggregationRule::uniform_mean(), p, c);
  CHECK(t.outcome.kind == OutcomeKind::Returned);
  for (std::size_t i = 1; i < t.rounds.size(); ++i) {
    CHECK(t.rounds[i].average_loss < t.rounds[i - 1].average_loss);
  }
}

TEST_CASE("all agents defecting ends the run with a flag") {
  const auto p = make_benign_example();
  RunConfig c;
  c.w0 = pt({0.1, 0});
  const auto t = run_icfo(AggregationRule::uniform_mean(), p, c);
  CHECK(t.outcome.kind == OutcomeKind::Returned);
  CHECK(t.outcome.all_defected);
  CHECK(t.rounds.size() == 1);
  CHECK(t.rounds[0].defections == AgentSet{0, 1});
}

TEST_CASE("FedAvg with K = 1 matches uniform GD bit for bit") {
  const auto p = make_random_quadratics(3, 5, 2);
  RunConfig c;
  c.w0 = seeded_initialization(p, 2);
  c.eta = 0.01;
  c.max_rounds = 500;
  const auto a = run_icfo(AggregationRule::uniform_mean(), p, c);
  const auto b = run_fedavg(p, FedAvgOptions{1, false}, c);
  REQUIRE(a.rounds.size() == b.rounds.size());
  for (std::size_t i = 0; i < a.rounds.size(); ++i) {
    REQUIRE(a.rounds[i].iterate == b.rounds[i].iterate);
    REQUIRE(a.rounds[i].per_agent_loss == b.rounds[i].per_agent_loss);
  }
  CHECK(a.outcome.point == b.outcome.point);
}

TEST_CASE("FedAvg local steps and stochastic mode") {
  const auto p = make_problem("regression:M=3,d=5,n=40,q=0.5,seed=1");
  RunConfig c;
  c.w0 = seeded_initialization(p, 3);
  c.eta = 0.01;
  c.max_rounds = 200;
  c.seed = 5;
  const auto a = run_fedavg(p, FedAvgOptions{4, true}, c);
  const auto b = run_fedavg(p, FedAvgOptions{4, true}, c);
  REQUIRE(a.rounds.size() == b.rounds.size());
  for (std::size_t i = 0; i < a.rounds.size(); ++i) REQUIRE(a.rounds[i].iterate == b.rounds[i].iterate);
  CHECK(a.rounds.back().average_loss < a.rounds.front().average_loss);
  CHECK_THROWS_AS(run_fedavg(p, FedAvgOptions{0, false}, c), InvalidInput);
  CHECK_THROWS_AS(run_fedavg(make_benign_example(), FedAvgOptions{1, true}, c), InvalidInput);
}

TEST_CASE("make_algorithm ids") {
  CHECK(make_algorithm("ada-gd").id == "ada-gd");
  CHECK(make_algorithm("uniform-gd").id == "uniform-gd");
  CHECK(make_algorithm("fedavg:K=3,stochastic").id == "fedavg:K=3,stochastic");
  CHECK_THROWS_AS(make_algorithm("sgd"), InvalidInput);
  CHECK_THROWS_AS(make_algorithm("fedavg:K=0"), InvalidInput);
  CHECK_THROWS_AS(make_algorithm("fedavg:L=2"), InvalidInput);
}

TEST_CASE("config snapshots round-trip") {
  RunConfig c;
  c.eta = 1.0 / 3.0;
  c.epsilons = {0.1, 0.2};
  c.delta = 0.05;
  c.max_rounds = 77;
  c.w0 = pt({0.1, -2});
  c.seed = 9;
  c.enforce_preconditions = false;
  const auto back = config_from_snapshot(config_snapshot(c));
  CHECK(back.eta == c.eta);
  CHECK(back.epsilons == c.epsilons);
  CHECK(back.max_rounds == 77);
  CHECK(back.w0 == c.w0);
  CHECK(back.seed == 9);
  CHECK_FALSE(back.enforce_preconditions);
}

TEST_CASE("per-agent precisions") {
  const auto p = make_random_quadratics(2, 3, 1);
  RunConfig c;
  c.epsilons = {0.1, 0.3};
  CHECK(resolve_epsilons(p, c) == std::vector<double>{0.1, 0.3});
  c.epsilons = {0.1, 0.2, 0.3};
  CHECK_THROWS_AS(resolve_epsilons(p, c), InvalidInput);
}
