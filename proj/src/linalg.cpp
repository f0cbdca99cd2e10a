#include "defectsim/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace defectsim {

namespace {

void check_dims(std::span<const Point> vectors, Eigen::Index dim, const char* where) {
  for (const auto& v : vectors) {
    if (v.size() != dim) throw InvalidInput(std::string(where) + ": dimension mismatch");
  }
}

double admission_threshold(std::span<const Point> vectors, double tol) {
  double scale = 0.0;
  for (const auto& v : vectors) scale = std::max(scale, v.norm());
  return tol * (scale > 0.0 ? scale : 1.0);
}

// Two MGS sweeps of r against the current basis.
void orthogonalize(Point& r, const std::vector<Point>& basis) {
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& q : basis) r -= q.dot(r) * q;
  }
}

}  // namespace

Point SpanBasis::project(const Point& v) const {
  Point p = Point::Zero(v.size());
  for (const auto& q : basis) p += q.dot(v) * q;
  return p;
}

SpanBasis orthonormal_basis(std::span<const Point> vectors, double tol) {
  if (!(tol > 0.0)) throw InvalidInput("orthonormal_basis: tol must be positive");
  SpanBasis out;
  out.tol = tol;
  if (vectors.empty()) return out;
  const Eigen::Index dim = vectors.front().size();
  check_dims(vectors, dim, "orthonormal_basis");
  const double threshold = admission_threshold(vectors, tol);
  for (const auto& v : vectors) {
    if (static_cast<Eigen::Index>(out.basis.size()) == dim) break;
    Point r = v;
    orthogonalize(r, out.basis);
    const double n = r.norm();
    if (n > threshold) out.basis.push_back(r / n);
  }
  return out;
}

Point project_complement(const Point& v, std::span<const Point> span_vectors, double tol) {
  check_dims(span_vectors, v.size(), "project_complement");
  if (span_vectors.empty()) return v;
  const SpanBasis basis = orthonormal_basis(span_vectors, tol);
  Point r = v;
  orthogonalize(r, basis.basis);
  return r;
}

bool linearly_independent(std::span<const Point> vectors, double tol) {
  if (vectors.empty()) return true;
  check_dims(vectors, vectors.front().size(), "linearly_independent");
  const double threshold = admission_threshold(vectors, tol);
  std::vector<Point> nonzero;
  for (const auto& v : vectors) {
    if (v.norm() > threshold) nonzero.push_back(v);
  }
  return orthonormal_basis(nonzero, tol).rank() == nonzero.size();
}

Point finite_diff_gradient(const std::function<double(const Point&)>& f, const Point& w,
                           double h) {
  if (!(h > 0.0)) throw InvalidInput("finite_diff_gradient: h must be positive");
  Point g(w.size());
  Point probe = w;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    probe[i] = w[i] + h;
    const double up = f(probe);
    probe[i] = w[i] - h;
    const double down = f(probe);
    probe[i] = w[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw InvalidInput("finite_diff_gradient: non-finite function value");
    }
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace defectsim
