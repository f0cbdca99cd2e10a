#include <string>

#include "defectsim/problems.hpp"

namespace defectsim {

ProblemInstance make_problem(std::string_view id) {
  const ParsedId parsed = parse_id(id);
  const double eps = parsed.number("eps", kDefaultPrecision);
  const std::string& name = parsed.name;
  ProblemInstance p;
  if (name == "bad-region") {
    parsed.expect_only({"mu", "eps"});
    p = make_bad_region_example(parsed.number("mu", kDefaultSmoothing), eps);
  } else if (name == "uniform-agg") {
    parsed.expect_only({"alpha", "mu", "eps"});
    if (!parsed.params.count("alpha")) throw InvalidInput("uniform-agg needs alpha=<value>");
    p = make_uniform_agg_family(parsed.number("alpha", 0.0),
                                parsed.number("mu", kDefaultSmoothing), eps);
  } else if (name == "benign") {
    parsed.expect_only({"eps"});
    p = make_benign_example(eps);
  } else if (name == "nonhetero-bad") {
    parsed.expect_only({"mu", "eps"});
    p = make_nonhetero_bad_example(parsed.number("mu", kDefaultSmoothing), eps);
  } else if (name == "quadratic") {
    parsed.expect_only({"M", "d", "seed", "eps"});
    p = make_random_quadratics(static_cast<int>(parsed.integer("M", 2)),
                               static_cast<int>(parsed.integer("d", 3)),
                               static_cast<std::uint64_t>(parsed.integer("seed", 0)), eps);
  } else if (name == "regression") {
    parsed.expect_only({"M", "d", "n", "q", "seed", "eps"});
    p = make_regression_problem(static_cast<int>(parsed.integer("M", 2)),
                                static_cast<int>(parsed.integer("d", 3)),
                                static_cast<int>(parsed.integer("n", 40)),
                                parsed.number("q", 0.5),
                                static_cast<std::uint64_t>(parsed.integer("seed", 0)), eps);
  } else {
    throw InvalidInput("unknown problem id: " + std::string(id));
  }
  p.id = std::string(id);
  return p;
}

std::vector<std::string> catalog_examples() {
  return {"bad-region",      "bad-region:mu=0.001",      "uniform-agg:alpha=0.3",
          "benign",          "nonhetero-bad",            "quadratic:M=5,d=10,seed=7",
          "regression:M=3,d=5,n=40,q=0.5,seed=1"};
}

}  // namespace defectsim
