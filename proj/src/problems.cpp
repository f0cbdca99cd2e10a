#include "defectsim/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <utility>

#include "defectsim/linalg.hpp"

namespace defectsim {

namespace {

double huber(double t, double mu) {
  const double a = std::abs(t);
  return a <= mu ? t * t / (2.0 * mu) : a - mu / 2.0;
}

double huber_slope(double t, double mu) {
  if (std::abs(t) <= mu) return t / mu;
  return t > 0.0 ? 1.0 : -1.0;
}

double smoothed_hinge(double t, double mu) {
  if (t <= 0.0) return 0.0;
  return t <= mu ? t * t / (2.0 * mu) : t - mu / 2.0;
}

double smoothed_hinge_slope(double t, double mu) {
  if (t <= 0.0) return 0.0;
  return t <= mu ? t / mu : 1.0;
}

void require_smoothing(const Point& a, double mu, const char* where) {
  if (!(mu > 0.0)) throw InvalidInput(std::string(where) + ": mu must be positive");
  if (a.size() == 0 || a.norm() == 0.0) {
    throw InvalidInput(std::string(where) + ": direction must be nonzero");
  }
  if (!a.allFinite()) throw InvalidInput(std::string(where) + ": non-finite direction");
}

Point vec2(double x, double y) {
  Point p(2);
  p << x, y;
  return p;
}

double max_eigenvalue(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().maxCoeff();
}

std::vector<double> uniform_precisions(int m, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidInput("precision must be positive");
  return std::vector<double>(static_cast<std::size_t>(m), epsilon);
}

}  // namespace

AgentObjective smooth_abs(const Point& a, double mu, std::string name) {
  require_smoothing(a, mu, "smooth_abs");
  const double an = a.norm();
  AgentObjective obj;
  obj.name = std::move(name);
  obj.oracle = [a, mu](const Point& w) {
    const double t = a.dot(w);
    return OracleOutput{huber(t, mu), huber_slope(t, mu) * a};
  };
  obj.smoothness = an * an / mu;
  obj.lipschitz = an;
  obj.optimum_witness = Point::Zero(a.size());
  obj.kink_distance = [a, mu, an](const Point& w) {
    const double t = a.dot(w);
    return std::min(std::abs(t - mu), std::abs(t + mu)) / an;
  };
  return obj;
}

AgentObjective smooth_hinge(const Point& a, double b, double mu, std::string name) {
  require_smoothing(a, mu, "smooth_hinge");
  if (!std::isfinite(b)) throw InvalidInput("smooth_hinge: offset must be finite");
  const double an = a.norm();
  AgentObjective obj;
  obj.name = std::move(name);
  obj.oracle = [a, b, mu](const Point& w) {
    const double t = a.dot(w) + b;
    return OracleOutput{smoothed_hinge(t, mu), smoothed_hinge_slope(t, mu) * a};
  };
  obj.smoothness = an * an / mu;
  obj.lipschitz = an;
  obj.optimum_witness = (-b / (an * an)) * a;
  obj.kink_distance = [a, b, mu, an](const Point& w) {
    const double t = a.dot(w) + b;
    return std::min(std::abs(t), std::abs(t - mu)) / an;
  };
  return obj;
}

ProblemInstance make_bad_region_example(double mu, double epsilon) {
  ProblemInstance p;
  p.id = "bad-region:mu=" + format_double(mu);
  p.dimension = 2;
  p.sublevel_allowance = 2.0 * mu;
  p.agents.push_back(smooth_abs(vec2(0.0, 1.0), mu, "F1=|(0,1)^T w|"));
  p.agents.push_back(smooth_abs(vec2(1.0, -1.0), mu, "F2=|(1,-1)^T w|"));
  p.precisions = uniform_precisions(2, epsilon);
  p.shared_optimum = Point::Zero(2);
  validate_problem(p);
  return p;
}

ProblemInstance make_uniform_agg_family(double alpha, double mu, double epsilon) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw InvalidInput("make_uniform_agg_family: alpha must be >= 0");
  }
  ProblemInstance p;
  p.id = "uniform-agg:alpha=" + format_double(alpha) + ",mu=" + format_double(mu);
  p.dimension = 2;
  p.sublevel_allowance = 2.0 * mu;
  p.agents.push_back(smooth_hinge(vec2(0.0, 1.0), 0.0, mu, "F1=max((0,1)^T w,0)"));
  p.agents.push_back(smooth_hinge(vec2(1.0, -1.0), alpha, mu, "F2=max((1,-1)^T w+alpha,0)"));
  p.precisions = uniform_precisions(2, epsilon);
  p.shared_optimum = vec2(-alpha - 1.0, -1.0);
  for (auto& a : p.agents) a.optimum_witness = p.shared_optimum;
  validate_problem(p);
  return p;
}

ProblemInstance make_benign_example(double epsilon) {
  auto scaled_sq = [](double scale, std::string name) {
    AgentObjective obj;
    obj.name = std::move(name);
    obj.oracle = [scale](const Point& w) {
      return OracleOutput{0.5 * scale * w.squaredNorm(), scale * w};
    };
    obj.smoothness = scale;
    obj.lipschitz = 0.0;  // set from the region radius below
    obj.optimum_witness = Point::Zero(2);
    return obj;
  };
  ProblemInstance p;
  p.id = "benign";
  p.dimension = 2;
  p.lipschitz_radius = 10.0;
  p.agents.push_back(scaled_sq(1.0, "F1=|w|^2/2"));
  p.agents.push_back(scaled_sq(0.5, "F2=|w|^2/4"));
  for (auto& a : p.agents) a.lipschitz = a.smoothness * p.lipschitz_radius;
  p.precisions = uniform_precisions(2, epsilon);
  p.shared_optimum = Point::Zero(2);
  validate_problem(p);
  return p;
}

CorridorExampleConstants corridor_example_constants() {
  CorridorExampleConstants c;
  const double ca = std::cos(c.ellipse_angle);
  const double sa = std::sin(c.ellipse_angle);
  // Horizontal half-extent of the ellipse: sqrt(e1^T A^{-1} e1).
  const double reach = std::hypot(c.ellipse_major * ca, c.ellipse_minor * sa);
  c.center = vec2(reach - c.tip_overlap, 1.0);
  c.w0 = vec2(-3.0, 4.0);
  // grad F2 is horizontal where (A u)_2 = 0, i.e. on u_2 = -(A_21 / A_22) u_1.
  const double inv_a2 = 1.0 / (c.ellipse_major * c.ellipse_major);
  const double inv_b2 = 1.0 / (c.ellipse_minor * c.ellipse_minor);
  const double a21 = ca * sa * (inv_a2 - inv_b2);
  const double a22 = sa * sa * inv_a2 + ca * ca * inv_b2;
  const double u1 = -1.0 - c.center[0];
  c.parallel_point = vec2(-1.0, c.center[1] - a21 / a22 * u1);
  return c;
}

ProblemInstance make_nonhetero_bad_example(double mu, double epsilon) {
  const CorridorExampleConstants c = corridor_example_constants();
  const double width = c.corridor_half_width;
  if (!(mu > 0.0) || mu >= width) {
    throw InvalidInput("make_nonhetero_bad_example: need 0 < mu < corridor half-width");
  }

  Eigen::Matrix2d rot;
  rot << std::cos(c.ellipse_angle), -std::sin(c.ellipse_angle), std::sin(c.ellipse_angle),
      std::cos(c.ellipse_angle);
  const Eigen::Vector2d semi(c.ellipse_major, c.ellipse_minor);
  const Eigen::Matrix2d shape = rot * semi.cwiseInverse().asDiagonal() * rot.transpose();
  const Eigen::Matrix2d metric = shape * shape;  // A = B^T B
  const Point center = c.center;
  const double kappa = c.curvature;
  const double b_max = 1.0 / c.ellipse_minor;  // largest eigenvalue of B

  // The leftmost point of the zero ellipse, pulled 10% toward the center,
  // lies strictly inside both zero regions.
  const Eigen::Vector2d e1(1.0, 0.0);
  const Eigen::Vector2d ainv_e1 = metric.inverse() * e1;
  const Point leftmost = center - ainv_e1 / std::sqrt(e1.dot(ainv_e1));
  const Point optimum = center + 0.9 * (leftmost - center);

  ProblemInstance p;
  p.id = "nonhetero-bad:mu=" + format_double(mu);
  p.dimension = 2;
  p.sublevel_allowance = 2.0 * mu;
  p.lipschitz_radius = c.lipschitz_radius;

  AgentObjective corridor;
  corridor.name = "F1=max(|w_1|-0.1,0) (smoothed)";
  corridor.oracle = [width, mu](const Point& w) {
    const double right = w[0] - width;
    const double left = -w[0] - width;
    return OracleOutput{
        smoothed_hinge(right, mu) + smoothed_hinge(left, mu),
        vec2(smoothed_hinge_slope(right, mu) - smoothed_hinge_slope(left, mu), 0.0)};
  };
  corridor.smoothness = 1.0 / mu;
  corridor.lipschitz = 1.0;
  corridor.optimum_witness = optimum;
  corridor.kink_distance = [width, mu](const Point& w) {
    const double x = std::abs(w[0]);
    return std::min(std::abs(x - width), std::abs(x - width - mu));
  };
  p.agents.push_back(std::move(corridor));

  AgentObjective bowl;
  bowl.name = "F2=kappa/2*max(|B(w-c)|-1,0)^2";
  bowl.oracle = [shape, metric, center, kappa](const Point& w) {
    const Eigen::Vector2d u = w - center;
    const double s = (shape * u).norm();
    if (s <= 1.0) return OracleOutput{0.0, Point::Zero(2)};
    const double excess = s - 1.0;
    return OracleOutput{0.5 * kappa * excess * excess, Point(kappa * excess / s * (metric * u))};
  };
  // Hess <= kappa * (grad s grad s^T + (s-1) Hess s) <= 2 kappa lambda_max(A).
  bowl.smoothness = 2.0 * kappa * b_max * b_max;
  bowl.lipschitz =
      kappa * b_max * b_max * (c.lipschitz_radius + (optimum - center).norm());
  bowl.optimum_witness = optimum;
  bowl.kink_distance = [shape, center, b_max](const Point& w) {
    const Eigen::Vector2d u = w - center;
    return std::abs((shape * u).norm() - 1.0) / b_max;
  };
  p.agents.push_back(std::move(bowl));

  p.precisions = uniform_precisions(2, epsilon);
  p.shared_optimum = optimum;
  p.probe_points.push_back(c.parallel_point);
  validate_problem(p);
  return p;
}

ProblemInstance make_random_quadratics(int num_agents, int dimension, std::uint64_t seed,
                                       double epsilon) {
  if (num_agents < 1 || dimension < 1) throw InvalidInput("make_random_quadratics: M, d >= 1");
  if (num_agents > dimension) {
    throw InvalidInput("make_random_quadratics: M > d makes gradients dependent");
  }
  if (dimension > 50) throw InvalidInput("make_random_quadratics: d must be <= 50");
  constexpr double kRadius = 4.0;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Point optimum(dimension);
  for (int i = 0; i < dimension; ++i) optimum[i] = normal(rng);

  ProblemInstance p;
  p.id = "quadratic:M=" + std::to_string(num_agents) + ",d=" + std::to_string(dimension) +
         ",seed=" + std::to_string(seed);
  p.dimension = dimension;
  p.lipschitz_radius = kRadius;
  for (int m = 0; m < num_agents; ++m) {
    Eigen::MatrixXd b(dimension, dimension);
    for (int i = 0; i < dimension; ++i) {
      for (int j = 0; j < dimension; ++j) b(i, j) = normal(rng);
    }
    const Eigen::MatrixXd a =
        b.transpose() * b + 0.1 * Eigen::MatrixXd::Identity(dimension, dimension);
    AgentObjective obj;
    obj.name = "quadratic_" + std::to_string(m);
    obj.oracle = [a, optimum](const Point& w) {
      const Point u = w - optimum;
      Point g = a * u;
      return OracleOutput{0.5 * u.dot(g), std::move(g)};
    };
    obj.smoothness = max_eigenvalue(a);
    obj.lipschitz = obj.smoothness * kRadius;
    obj.optimum_witness = optimum;
    p.agents.push_back(std::move(obj));
  }
  p.precisions = uniform_precisions(num_agents, epsilon);
  p.shared_optimum = optimum;
  validate_problem(p);
  return p;
}

std::vector<LabeledDataset> partition_heterogeneity(std::span<const LabeledDataset> datasets,
                                                    double q, std::uint64_t seed) {
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidInput("partition_heterogeneity: q must be in [0,1]");
  if (datasets.empty()) return {};
  std::size_t size = datasets.front().points.size();
  for (const auto& d : datasets) size = std::min(size, d.points.size());

  const auto shared = static_cast<std::size_t>(std::llround(q * static_cast<double>(size)));
  const std::size_t n = datasets.size();
  std::mt19937_64 rng(seed);

  std::vector<LabeledDataset> out(n);
  std::vector<Sample> pool;
  pool.reserve(shared * n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> order(size);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> pooled(size, false);
    for (std::size_t k = 0; k < shared; ++k) pooled[order[k]] = true;
    out[i].owner = static_cast<int>(i);
    for (std::size_t k = 0; k < size; ++k) {
      if (pooled[k]) {
        pool.push_back(datasets[i].points[k]);
      } else {
        out[i].points.push_back(datasets[i].points[k]);
      }
    }
  }
  std::shuffle(pool.begin(), pool.end(), rng);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].points.insert(out[i].points.end(), pool.begin() + static_cast<long>(i * shared),
                         pool.begin() + static_cast<long>((i + 1) * shared));
  }
  return out;
}

PointwiseLoss squared_loss() {
  PointwiseLoss loss;
  loss.name = "squared";
  loss.evaluate = [](const Point& w, const Sample& z) {
    const double r = z.features.dot(w) - z.label;
    return OracleOutput{0.5 * r * r, r * z.features};
  };
  return loss;
}

ProblemInstance make_finite_sum_problem(std::string id, std::vector<LabeledDataset> datasets,
                                        PointwiseLoss loss, const Point& shared_optimum,
                                        double lipschitz_radius, double epsilon) {
  if (datasets.empty()) throw InvalidInput("finite-sum problem needs datasets");
  auto data = std::make_shared<FiniteSumData>();
  data->datasets = std::move(datasets);
  data->loss = std::move(loss);

  ProblemInstance p;
  p.id = std::move(id);
  p.dimension = static_cast<int>(shared_optimum.size());
  p.lipschitz_radius = lipschitz_radius;
  for (std::size_t m = 0; m < data->datasets.size(); ++m) {
    const auto& ds = data->datasets[m];
    if (ds.points.empty()) throw InvalidInput("finite-sum problem: empty dataset");
    AgentObjective obj;
    obj.name = "dataset_" + std::to_string(m);
    obj.oracle = [data, m](const Point& w) {
      const auto& pts = data->datasets[m].points;
      OracleOutput acc{0.0, Point::Zero(w.size())};
      for (const auto& z : pts) {
        const OracleOutput o = data->loss.evaluate(w, z);
        acc.value += o.value;
        acc.gradient += o.gradient;
      }
      const double inv = 1.0 / static_cast<double>(pts.size());
      acc.value *= inv;
      acc.gradient *= inv;
      return acc;
    };
    // Squared loss: Hessian is the feature second moment.
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(p.dimension, p.dimension);
    for (const auto& z : ds.points) second += z.features * z.features.transpose();
    second /= static_cast<double>(ds.points.size());
    obj.smoothness = max_eigenvalue(second);
    obj.lipschitz = obj.smoothness * lipschitz_radius;
    obj.optimum_witness = shared_optimum;
    p.agents.push_back(std::move(obj));
  }
  p.precisions = uniform_precisions(p.num_agents(), epsilon);
  p.shared_optimum = shared_optimum;
  p.finite_sum = std::move(data);
  validate_problem(p);
  return p;
}

ProblemInstance make_regression_problem(int num_agents, int dimension, int samples_per_agent,
                                        double q, std::uint64_t seed, double epsilon) {
  if (num_agents < 1 || dimension < 1 || samples_per_agent < 1) {
    throw InvalidInput("make_regression_problem: M, d, n must be positive");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Point optimum(dimension);
  for (int i = 0; i < dimension; ++i) optimum[i] = normal(rng);

  std::vector<LabeledDataset> raw(static_cast<std::size_t>(num_agents));
  for (int m = 0; m < num_agents; ++m) {
    raw[m].owner = m;
    Point shift = Point::Zero(dimension);
    shift[m % dimension] = 3.0;
    for (int k = 0; k < samples_per_agent; ++k) {
      Point x(dimension);
      for (int i = 0; i < dimension; ++i) x[i] = shift[i] + normal(rng);
      raw[m].points.push_back(Sample{x, x.dot(optimum)});
    }
  }
  auto mixed = partition_heterogeneity(raw, q, seed + 1);
  const std::string id = "regression:M=" + std::to_string(num_agents) +
                         ",d=" + std::to_string(dimension) +
                         ",n=" + std::to_string(samples_per_agent) + ",q=" + format_double(q) +
                         ",seed=" + std::to_string(seed);
  return make_finite_sum_problem(id, std::move(mixed), squared_loss(), optimum, 4.0, epsilon);
}

Point seeded_initialization(const ProblemInstance& problem, std::uint64_t seed, double radius) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  // A single ray can stay inside a hinge's zero half-space, so redraw the
  // direction a few times.
  for (int draw = 0; draw < 64; ++draw) {
    Point dir(problem.dimension);
    for (int i = 0; i < problem.dimension; ++i) dir[i] = normal(rng);
    if (dir.norm() == 0.0) dir[0] = 1.0;
    dir.normalize();
    double r = radius;
    for (int attempt = 0; attempt < 30; ++attempt, r *= 2.0) {
      const Point w = problem.shared_optimum + r * dir;
      bool outside = true;
      for (int m = 0; m < problem.num_agents(); ++m) {
        if (wants_to_defect(evaluate_oracle(problem.agents[m], w).value, problem.precisions[m])) {
          outside = false;
        }
      }
      if (outside) return w;
    }
  }
  throw InvalidInput("seeded_initialization: no point outside every sublevel set found");
}

bool AssumptionReport::basic_assumptions_hold() const {
  return checks.size() >= 3 && checks[0].passed && checks[1].passed && checks[2].passed;
}

bool AssumptionReport::all_hold() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const AssumptionCheck& AssumptionReport::get(std::string_view name) const {
  for (const auto& c : checks) {
    if (c.name == name) return c;
  }
  throw InvalidInput("no assumption check named " + std::string(name));
}

AssumptionReport validate_assumptions(const ProblemInstance& problem, int samples,
                                      double box_radius, std::uint64_t seed, double tol) {
  if (samples < 1) throw InvalidInput("validate_assumptions: samples must be >= 1");
  const int d = problem.dimension;
  // Keep samples inside the region where the declared L holds.
  const double radius =
      std::min(box_radius, problem.lipschitz_radius / std::sqrt(static_cast<double>(d)));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-radius, radius);
  auto draw = [&] {
    Point w(d);
    for (int i = 0; i < d; ++i) w[i] = problem.shared_optimum[i] + unif(rng);
    return w;
  };

  AssumptionCheck convex{"convex-smooth", true, 0.0, ""};
  AssumptionCheck lipschitz{"lipschitz", true, 0.0, ""};
  AssumptionCheck realizable{"realizable", true, 0.0, ""};
  AssumptionCheck independent{"independence", true, 0.0, ""};

  auto note = [](AssumptionCheck& c, double excess, const std::string& what) {
    if (excess > c.worst_violation) c.worst_violation = excess;
    if (excess > 0.0 && c.passed) {
      c.passed = false;
      c.detail = what;
    }
  };

  for (int s = 0; s < samples; ++s) {
    const Point u = draw();
    const Point v = draw();
    const Point mid = 0.5 * (u + v);
    const double dist = (u - v).norm();
    for (const auto& agent : problem.agents) {
      const OracleOutput fu = evaluate_oracle(agent, u);
      const OracleOutput fv = evaluate_oracle(agent, v);
      const double fm = evaluate_oracle(agent, mid).value;
      const double scale = 1.0 + std::abs(fu.value) + std::abs(fv.value);
      note(convex, fm - 0.5 * (fu.value + fv.value) - tol * scale,
           agent.name + ": midpoint convexity fails");
      const double lip_h = agent.smoothness * dist;
      note(convex, (fu.gradient - fv.gradient).norm() - lip_h - tol * (1.0 + lip_h),
           agent.name + ": gradient not H-Lipschitz");
      const double lip_l = agent.lipschitz * dist;
      note(lipschitz, std::abs(fu.value - fv.value) - lip_l - tol * (1.0 + lip_l),
           agent.name + ": value not L-Lipschitz");
    }
  }

  for (const auto& agent : problem.agents) {
    note(realizable, evaluate_oracle(agent, problem.shared_optimum).value - tol,
         agent.name + ": not zero at the shared optimum");
  }

  std::vector<Point> points = problem.probe_points;
  for (int s = 0; s < samples; ++s) points.push_back(draw());
  int checked = 0;
  int dependent = 0;
  for (const auto& w : points) {
    std::vector<Point> grads;
    bool optimal = true;
    bool any_gradient = false;
    for (const auto& agent : problem.agents) {
      OracleOutput o = evaluate_oracle(agent, w);
      optimal = optimal && o.value <= tol;
      any_gradient = any_gradient || o.gradient.norm() > 0.0;
      grads.push_back(std::move(o.gradient));
    }
    if (optimal || !any_gradient) continue;
    ++checked;
    if (!linearly_independent(grads)) {
      if (dependent++ == 0) independent.detail = "dependent gradients at " + format_point(w);
    }
  }
  // worst_violation: fraction of checked points with dependent gradients
  if (dependent > 0) {
    independent.passed = false;
    independent.worst_violation = static_cast<double>(dependent) / checked;
  }
  return AssumptionReport{{convex, lipschitz, realizable, independent}};
}

}  // namespace defectsim
