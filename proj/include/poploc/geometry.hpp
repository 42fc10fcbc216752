#ifndef POPLOC_GEOMETRY_HPP
#define POPLOC_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

#include "poploc/vec.hpp"

namespace poploc {

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Anchor set is (numerically) unusable: affinely dependent or close to it.
struct DegenerateGeometryError : GeometryError {
  using GeometryError::GeometryError;
};

// No point satisfies the given distances within tolerance. In the
// self-stabilising protocol this is treated as an anomaly, not a crash.
struct InconsistentAnchorsError : GeometryError {
  using GeometryError::GeometryError;
};

// Pivot guard for the linear solves: anchor sets past this are treated as
// degenerate rather than systems to survive. Positioning chains feed
// computed labels back in as anchors, so each solve multiplies the
// anchors' own error by its sensitivity; the bound keeps that per-step
// amplification small enough that the accumulated error over the deepest
// anchoring lineages stays well below the working tolerances. A thin
// anchor set would pass its own residual check (flat geometry is
// insensitive to transverse error) yet poison every later positioning
// against the mislabelled agent.
inline constexpr double kConditionThreshold = 20.0;

// Matching floor on pairwise anchor separation, relative to the data
// scale. Collected contacts respect it so that an agent never commits to
// a contact set no third anchor can complete.
inline double min_anchor_separation(double scale) {
  return std::max(1.0, scale) / (2.0 * kConditionThreshold);
}

// Relative tolerance test used for every geometric equality in the
// library: |a - b| <= tol * (1 + scale).
inline bool within_tol(double a, double b, double tol, double scale) {
  return std::abs(a - b) <= tol * (1.0 + scale);
}

inline double distance(const Vec& p, const Vec& q) {
  if (p.dim() != q.dim()) throw std::invalid_argument("distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double d = p[i] - q[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// Label inconsistency test (relative in the measured distance).
inline bool consistent(const Vec& x_u, const Vec& x_v, double d_uv, double tol) {
  return within_tol(distance(x_u, x_v), d_uv, tol, std::abs(d_uv));
}

// One (position, distance) pair as held by an agent or the leader.
struct Anchor {
  Vec position;
  double dist = 0.0;

  friend bool operator==(const Anchor&, const Anchor&) = default;
};

// Inline fixed-capacity anchor list; capacity suffices for the k+1
// contacts a blue agent can ever hold.
class AnchorList {
 public:
  static constexpr std::size_t kCapacity = kMaxDim + 1;

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  const Anchor& operator[](std::size_t i) const { return a_[i]; }
  Anchor& operator[](std::size_t i) { return a_[i]; }

  const Anchor* begin() const { return a_.data(); }
  const Anchor* end() const { return a_.data() + size_; }

  void push_back(const Anchor& a) {
    if (size_ == kCapacity) throw std::length_error("AnchorList: capacity exceeded");
    a_[size_++] = a;
  }

  void clear() {
    for (std::size_t i = 0; i < size_; ++i) a_[i] = Anchor{};
    size_ = 0;
  }

  std::span<const Anchor> span() const { return {a_.data(), size_}; }

  // Position-based membership: positions are the identities of anonymous
  // green agents, distinct beyond tolerance by the general-position input.
  bool contains_position(const Vec& p, double tol) const {
    for (std::size_t i = 0; i < size_; ++i) {
      if (within_tol(distance(a_[i].position, p), 0.0, tol, a_[i].position.norm())) return true;
    }
    return false;
  }

  friend bool operator==(const AnchorList&, const AnchorList&) = default;

 private:
  std::array<Anchor, kCapacity> a_{};
  std::size_t size_ = 0;
};

namespace detail {

// Partial-pivot Gaussian elimination on a dense m x m system held in
// fixed-size storage. Throws DegenerateGeometryError when the pivot
// spread (or a pivot tiny relative to the data scale) crosses the
// condition threshold.
inline void solve_linear(std::array<std::array<double, kMaxDim>, kMaxDim>& A,
                         std::array<double, kMaxDim>& b, std::size_t m,
                         double scale) {
  double max_pivot = 0.0;
  double min_pivot = 0.0;
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t best = col;
    for (std::size_t r = col + 1; r < m; ++r) {
      if (std::abs(A[r][col]) > std::abs(A[best][col])) best = r;
    }
    if (best != col) {
      std::swap(A[best], A[col]);
      std::swap(b[best], b[col]);
    }
    const double pivot = std::abs(A[col][col]);
    if (col == 0) {
      max_pivot = min_pivot = pivot;
    } else {
      max_pivot = std::max(max_pivot, pivot);
      min_pivot = std::min(min_pivot, pivot);
    }
    if (pivot == 0.0 || max_pivot > kConditionThreshold * min_pivot ||
        std::max(1.0, scale) > kConditionThreshold * pivot) {
      throw DegenerateGeometryError("degenerate anchors: near-singular system");
    }
    for (std::size_t r = col + 1; r < m; ++r) {
      const double f = A[r][col] / A[col][col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < m; ++c) A[r][c] -= f * A[col][c];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t i = m; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < m; ++c) s -= A[i][c] * b[c];
    b[i] = s / A[i][i];
  }
}

inline double anchor_scale(std::span<const Anchor> anchors) {
  double s = 0.0;
  for (const Anchor& a : anchors) {
    for (std::size_t i = 0; i < a.position.dim(); ++i) s = std::max(s, std::abs(a.position[i]));
    s = std::max(s, std::abs(a.dist));
  }
  return s;
}

}  // namespace detail

// Exact positioning from k+1 anchors in k dimensions: subtract the first
// sphere equation from the others to obtain a k x k linear system, then
// verify all residual distances within tolerance.
inline Vec multilaterate(std::span<const Anchor> anchors, std::size_t k, double tol) {
  if (k == 0 || k > kMaxDim) throw std::invalid_argument("multilaterate: bad dimension");
  if (anchors.size() != k + 1) throw std::invalid_argument("multilaterate: need exactly k+1 anchors");
  for (const Anchor& a : anchors) {
    if (a.position.dim() != k) throw std::invalid_argument("multilaterate: anchor dimension mismatch");
    if (a.dist < 0.0) throw std::invalid_argument("multilaterate: negative distance");
  }

  const Vec& a0 = anchors[0].position;
  const double d0sq = anchors[0].dist * anchors[0].dist;
  const double a0sq = a0.norm2();

  std::array<std::array<double, kMaxDim>, kMaxDim> A{};
  std::array<double, kMaxDim> b{};
  for (std::size_t j = 1; j <= k; ++j) {
    const Vec& aj = anchors[j].position;
    for (std::size_t c = 0; c < k; ++c) A[j - 1][c] = 2.0 * (aj[c] - a0[c]);
    b[j - 1] = aj.norm2() - a0sq - anchors[j].dist * anchors[j].dist + d0sq;
  }
  detail::solve_linear(A, b, k, detail::anchor_scale(anchors));

  Vec x(k);
  for (std::size_t c = 0; c < k; ++c) x[c] = b[c];

  for (const Anchor& a : anchors) {
    if (!within_tol(distance(x, a.position), a.dist, tol, std::abs(a.dist))) {
      throw InconsistentAnchorsError("multilaterate: residual distance beyond tolerance");
    }
  }
  return x;
}

// Incremental placement used while the anchor set spans only an
// i-dimensional subspace. anchors[0] must be the origin entry; the i
// following entries have nonzero coordinates only in the first i
// dimensions. The result's first i coordinates are the projection onto
// that subspace, coordinate i+1 is the (nonnegative) distance from it,
// and the rest are zero.
inline Vec position_in_subspace(std::span<const Anchor> anchors, std::size_t i,
                                std::size_t k, double tol) {
  if (k == 0 || k > kMaxDim || i >= k) throw std::invalid_argument("position_in_subspace: bad dimensions");
  if (anchors.size() != i + 1) throw std::invalid_argument("position_in_subspace: need i+1 anchors");
  const Vec& origin = anchors[0].position;
  if (origin.dim() != k || !within_tol(origin.norm(), 0.0, tol, 1.0)) {
    throw std::invalid_argument("position_in_subspace: first anchor must be the origin");
  }
  const double d0 = anchors[0].dist;

  Vec x(k);
  if (i > 0) {
    // Same subtract-spheres system as multilaterate, restricted to the
    // first i coordinates (anchor 0 is the origin, so it drops out).
    std::array<std::array<double, kMaxDim>, kMaxDim> A{};
    std::array<double, kMaxDim> b{};
    for (std::size_t j = 1; j <= i; ++j) {
      const Vec& aj = anchors[j].position;
      for (std::size_t c = 0; c < i; ++c) A[j - 1][c] = 2.0 * aj[c];
      b[j - 1] = aj.norm2() - anchors[j].dist * anchors[j].dist + d0 * d0;
    }
    detail::solve_linear(A, b, i, detail::anchor_scale(anchors));
    for (std::size_t c = 0; c < i; ++c) x[c] = b[c];
  }

  double proj2 = 0.0;
  for (std::size_t c = 0; c < i; ++c) proj2 += x[c] * x[c];
  const double radicand = d0 * d0 - proj2;
  const double scale = 1.0 + d0 * d0;
  if (radicand < -tol * scale) {
    throw InconsistentAnchorsError("position_in_subspace: projection exceeds leader distance");
  }
  x[i] = std::sqrt(std::max(0.0, radicand));
  return x;
}

}  // namespace poploc

#endif  // POPLOC_GEOMETRY_HPP
