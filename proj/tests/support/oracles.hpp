#pragma once

// Reference implementations used only by tests. They share no code with the
// library: plain loops over std::vector, written from the formulas directly.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline Vec solve(std::vector<Vec> a, Vec b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    if (a[piv][col] == 0.0) throw std::runtime_error("singular system");
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  Vec x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return x;
}

/// v minus its least-squares fit by the span vectors, via the normal equations
/// (U^T U) c = U^T v. Requires linearly independent span vectors.
inline Vec complement_by_least_squares(const Vec& v, const std::vector<Vec>& span) {
  if (span.empty()) return v;
  const std::size_t k = span.size();
  std::vector<Vec> gram(k, Vec(k));
  Vec rhs(k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) gram[i][j] = dot(span[i], span[j]);
    rhs[i] = dot(span[i], v);
  }
  const Vec c = solve(gram, rhs);
  Vec r = v;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t d = 0; d < v.size(); ++d) r[d] -= c[i] * span[i][d];
  }
  return r;
}

/// Huber cap of width mu.
inline double huber(double t, double mu) {
  return std::abs(t) <= mu ? t * t / (2.0 * mu) : std::abs(t) - mu / 2.0;
}

/// One-sided smoothing of max(t, 0).
inline double soft_hinge(double t, double mu) {
  if (t <= 0.0) return 0.0;
  if (t <= mu) return t * t / (2.0 * mu);
  return t - mu / 2.0;
}

}  // namespace oracle
