#pragma once

#include <initializer_list>

#include "defectsim/core.hpp"

inline defectsim::Point pt(std::initializer_list<double> xs) {
  defectsim::Point p(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) p[i++] = x;
  return p;
}

// F(w) = 0.5 |w - c|^2 with zero optimum at c.
inline defectsim::AgentObjective half_square(const defectsim::Point& c) {
  defectsim::AgentObjective a;
  a.name = "half_square";
  a.oracle = [c](const defectsim::Point& w) {
    return defectsim::OracleOutput{0.5 * (w - c).squaredNorm(), w - c};
  };
  a.smoothness = 1.0;
  a.lipschitz = 10.0;
  a.optimum_witness = c;
  return a;
}
