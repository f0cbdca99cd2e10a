#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "defectsim/algorithms.hpp"
#include "defectsim/analysis.hpp"
#include "defectsim/linalg.hpp"
#include "defectsim/problems.hpp"
#include "defectsim/trace_io.hpp"

namespace py = pybind11;
using namespace defectsim;

namespace {

py::dict check_dict(const AuditCheck& c) {
  py::dict d;
  d["name"] = c.name;
  d["passed"] = c.passed;
  d["applicable"] = c.applicable;
  d["worst_violation"] = c.worst_violation;
  d["round"] = c.round ? py::object(py::int_(*c.round)) : py::object(py::none());
  d["note"] = c.note;
  return d;
}

py::list report_list(const AuditReport& r) {
  py::list out;
  for (const auto& c : r.checks) out.append(check_dict(c));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Defection-aware federated optimization simulator";

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<PreconditionViolation>(m, "PreconditionViolation", PyExc_RuntimeError);

  py::class_<ProblemInstance>(m, "Problem")
      .def_readonly("id", &ProblemInstance::id)
      .def_readonly("dimension", &ProblemInstance::dimension)
      .def_property_readonly("num_agents", &ProblemInstance::num_agents)
      .def_readonly("precisions", &ProblemInstance::precisions)
      .def_readonly("shared_optimum", &ProblemInstance::shared_optimum)
      .def(
          "evaluate",
          [](const ProblemInstance& p, int agent, const Point& w) {
            if (agent < 0 || agent >= p.num_agents()) throw InvalidInput("agent index out of range");
            const auto o = evaluate_oracle(p.agents[static_cast<std::size_t>(agent)], w);
            return py::make_tuple(o.value, o.gradient);
          },
          py::arg("agent"), py::arg("w"))
      .def("average_loss", [](const ProblemInstance& p, const Point& w) { return average_loss(p, w); })
      .def("__repr__", [](const ProblemInstance& p) {
        return "<Problem " + p.id + " M=" + std::to_string(p.num_agents()) +
               " d=" + std::to_string(p.dimension) + ">";
      });

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("eta", &RunConfig::eta)
      .def_readwrite("epsilons", &RunConfig::epsilons)
      .def_readwrite("delta", &RunConfig::delta)
      .def_readwrite("max_rounds", &RunConfig::max_rounds)
      .def_readwrite("w0", &RunConfig::w0)
      .def_readwrite("rank_tol", &RunConfig::rank_tol)
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("enforce_preconditions", &RunConfig::enforce_preconditions);

  py::class_<Trace>(m, "Trace")
      .def_readonly("problem_id", &Trace::problem_id)
      .def_readonly("algorithm_id", &Trace::algorithm_id)
      .def_readonly("warnings", &Trace::warnings)
      .def_property_readonly("num_rounds", [](const Trace& t) { return t.rounds.size(); })
      .def_property_readonly("outcome", [](const Trace& t) { return std::string(to_string(t.outcome.kind)); })
      .def_property_readonly("reason", [](const Trace& t) { return t.outcome.reason; })
      .def_property_readonly("final_point", [](const Trace& t) { return final_point(t); })
      .def_property_readonly("defected_agents", &Trace::defected_agents)
      .def_property_readonly("average_losses",
                             [](const Trace& t) {
                               std::vector<double> f;
                               for (const auto& r : t.rounds) f.push_back(r.average_loss);
                               return f;
                             })
      .def("to_json", [](const Trace& t) { return trace_to_json(t).dump(); })
      .def("to_csv", &trace_to_csv)
      .def_static("from_json", [](const std::string& s) { return trace_from_json(nlohmann::json::parse(s)); });

  m.def("make_problem", &make_problem, py::arg("id"));
  m.def("catalog_examples", &catalog_examples);
  m.def("make_bad_region_example", &make_bad_region_example, py::arg("mu") = kDefaultSmoothing,
        py::arg("epsilon") = kDefaultPrecision);
  m.def("make_uniform_agg_family", &make_uniform_agg_family, py::arg("alpha"),
        py::arg("mu") = kDefaultSmoothing, py::arg("epsilon") = kDefaultPrecision);
  m.def("make_benign_example", &make_benign_example, py::arg("epsilon") = kDefaultPrecision);
  m.def("make_nonhetero_bad_example", &make_nonhetero_bad_example,
        py::arg("mu") = kDefaultSmoothing, py::arg("epsilon") = kDefaultPrecision);
  m.def("make_random_quadratics", &make_random_quadratics, py::arg("num_agents"),
        py::arg("dimension"), py::arg("seed"), py::arg("epsilon") = kDefaultPrecision);
  m.def("seeded_initialization", &seeded_initialization, py::arg("problem"), py::arg("seed"),
        py::arg("radius") = 2.0);
  m.def("validate_assumptions", [](const ProblemInstance& p) {
    py::dict out;
    for (const auto& c : validate_assumptions(p).checks) out[py::str(c.name)] = c.passed;
    return out;
  });

  m.def("step_size_bound", [](const ProblemInstance& p, double delta) { return step_size_bound(p, delta); },
        py::arg("problem"), py::arg("delta"));
  m.def("run_ada_gd", &run_ada_gd, py::arg("problem"), py::arg("config"));
  m.def("run_uniform_gd", [](const ProblemInstance& p, const RunConfig& c) {
    return run_icfo(AggregationRule::uniform_mean(), p, c);
  }, py::arg("problem"), py::arg("config"));
  m.def("run_fedavg", [](const ProblemInstance& p, const RunConfig& c, int local_steps, bool stochastic) {
    return run_fedavg(p, FedAvgOptions{local_steps, stochastic}, c);
  }, py::arg("problem"), py::arg("config"), py::arg("local_steps") = 1, py::arg("stochastic") = false);
  m.def("run", [](const std::string& algorithm, const ProblemInstance& p, const RunConfig& c) {
    return make_algorithm(algorithm).run(p, c);
  }, py::arg("algorithm"), py::arg("problem"), py::arg("config"));

  m.def("audit", [](const ProblemInstance& p, const Trace& t) { return report_list(audit_trace(p, t)); },
        py::arg("problem"), py::arg("trace"));
  m.def("classify", [](const ProblemInstance& p, const Trace& t) {
    return std::string(to_string(classify_defections(p, t)));
  }, py::arg("problem"), py::arg("trace"));
  m.def("derive_alpha_prime", &derive_alpha_prime, py::arg("defection_point"), py::arg("epsilon"),
        py::arg("mu"));

  m.def("project_complement", [](const Point& v, const std::vector<Point>& span, double tol) {
    return project_complement(v, span, tol);
  }, py::arg("v"), py::arg("span"), py::arg("tol") = kDefaultRankTol);
  m.def("linearly_independent", [](const std::vector<Point>& vs, double tol) {
    return linearly_independent(vs, tol);
  }, py::arg("vectors"), py::arg("tol") = kDefaultRankTol);
  m.def("finite_diff_gradient", &finite_diff_gradient, py::arg("f"), py::arg("w"), py::arg("h"));
}
