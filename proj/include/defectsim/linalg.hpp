#pragma once

// Small dense linear algebra for the projection step: orthonormal span bases,
// orthogonal-complement projection, rank tests and gradient verification.

#include <functional>
#include <span>
#include <vector>

#include "defectsim/core.hpp"

namespace defectsim {

inline constexpr double kDefaultRankTol = 1e-10;

struct SpanBasis {
  std::vector<Point> basis;  // orthonormal
  double tol = kDefaultRankTol;

  [[nodiscard]] std::size_t rank() const { return basis.size(); }
  /// Orthogonal projection of v onto the span.
  [[nodiscard]] Point project(const Point& v) const;
};

/// Modified Gram-Schmidt with one re-orthogonalization pass. A candidate is
/// admitted iff its residual exceeds tol * (largest input norm, or 1 when all
/// inputs are zero).
SpanBasis orthonormal_basis(std::span<const Point> vectors, double tol = kDefaultRankTol);

/// v minus its projection onto span(span_vectors).
Point project_complement(const Point& v, std::span<const Point> span_vectors,
                         double tol = kDefaultRankTol);

/// True iff every nonzero vector is admitted by orthonormal_basis. Vectors
/// below the admission threshold count as zero and are dropped first.
bool linearly_independent(std::span<const Point> vectors, double tol = kDefaultRankTol);

/// Central differences: (f(w + h e_i) - f(w - h e_i)) / 2h.
Point finite_diff_gradient(const std::function<double(const Point&)>& f, const Point& w,
                           double h);

}  // namespace defectsim
