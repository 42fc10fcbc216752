#ifndef POPLOC_VEC_HPP
#define POPLOC_VEC_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>

namespace poploc {

// Compile-time cap on the spatial dimension. Keeps every point inline so
// agent states are trivially copyable and the interaction loop never
// allocates. All protocols in this library run at k <= kMaxDim.
inline constexpr std::size_t kMaxDim = 4;

// A point (or displacement) in k-dimensional space, k <= kMaxDim.
// Unused trailing coordinates are kept at zero so that the defaulted
// comparison is exact value equality.
class Vec {
 public:
  Vec() = default;

  explicit Vec(std::size_t dim) : dim_(checked(dim)) {}

  Vec(std::initializer_list<double> coords) {
    dim_ = checked(coords.size());
    std::size_t i = 0;
    for (double x : coords) c_[i++] = x;
  }

  static Vec zero(std::size_t dim) { return Vec(dim); }

  std::size_t dim() const { return dim_; }

  double operator[](std::size_t i) const { return c_[i]; }
  double& operator[](std::size_t i) { return c_[i]; }

  friend bool operator==(const Vec&, const Vec&) = default;

  friend Vec operator-(const Vec& a, const Vec& b) {
    if (a.dim_ != b.dim_) throw std::invalid_argument("Vec: dimension mismatch");
    Vec r(a.dim_);
    for (std::size_t i = 0; i < a.dim_; ++i) r.c_[i] = a.c_[i] - b.c_[i];
    return r;
  }

  double norm2() const {
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) s += c_[i] * c_[i];
    return s;
  }

  double norm() const { return std::sqrt(norm2()); }

 private:
  static std::size_t checked(std::size_t dim) {
    if (dim > kMaxDim) throw std::invalid_argument("Vec: dimension exceeds kMaxDim");
    return dim;
  }

  std::array<double, kMaxDim> c_{};
  std::size_t dim_ = 0;
};

}  // namespace poploc

#endif  // POPLOC_VEC_HPP
