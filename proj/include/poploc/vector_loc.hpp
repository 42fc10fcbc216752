#ifndef POPLOC_VECTOR_LOC_HPP
#define POPLOC_VECTOR_LOC_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "poploc/engine.hpp"
#include "poploc/rng.hpp"
#include "poploc/vec.hpp"

namespace poploc {

// Self-stabilising positioning under vector queries: the initiator raises
// each label coordinate to max(own, responder's label minus the measured
// displacement). One-way communication; the responder never changes.
class VectorProtocol {
 public:
  using State = Vec;
  static constexpr QueryModel kQueryModel = QueryModel::kInitiatorVector;
  static constexpr bool kUsesQuery = true;

  explicit VectorProtocol(std::size_t k) : k_(k) {
    if (k == 0 || k > kMaxDim) throw std::invalid_argument("VectorProtocol: bad dimension");
  }

  std::size_t dimension() const { return k_; }

  bool step(Vec& u, Vec& v, const Vec& v_ir) const {
    bool changed = false;
    for (std::size_t j = 0; j < k_; ++j) {
      const double candidate = v[j] - v_ir[j];
      if (candidate > u[j]) {
        u[j] = candidate;
        changed = true;
      }
    }
    return changed;
  }

 private:
  std::size_t k_;
};

// Per-coordinate maximum of label minus true position over all agents.
// Invariant under the protocol (each effective update copies the
// responder's offset), which makes it the convergence certificate.
inline Vec compute_offsets(const std::vector<Vec>& config, const GroundTruth& gt) {
  if (config.size() != gt.size() || config.empty()) {
    throw std::invalid_argument("compute_offsets: configuration mismatch");
  }
  const std::size_t k = gt.dim();
  Vec m(k);
  for (std::size_t j = 0; j < k; ++j) m[j] = config[0][j] - gt.position(0)[j];
  for (std::size_t i = 1; i < config.size(); ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double off = config[i][j] - gt.position(i)[j];
      if (off > m[j]) m[j] = off;
    }
  }
  return m;
}

// Converged iff every agent attains the per-coordinate maximum offset.
inline bool oracle_vector_converged(const std::vector<Vec>& config, const GroundTruth& gt,
                                    double tol) {
  const Vec m = compute_offsets(config, gt);
  const std::size_t k = gt.dim();
  for (std::size_t i = 0; i < config.size(); ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double off = config[i][j] - gt.position(i)[j];
      if (!within_tol(off, m[j], tol, std::abs(m[j]))) return false;
    }
  }
  return true;
}

enum class VectorInitRecipe { kUniform, kAllEqual, kSingleOutlier };

// Labels are drawn on the same dyadic grid as generated positions (see
// generate_positions) with |x| <= kVectorLabelRange, keeping every label
// update exact in double precision.
inline constexpr int kCoordinateGridBits = 36;
inline constexpr double kVectorLabelRange = 1000.0;

inline std::vector<Vec> make_vector_config(std::size_t n, std::size_t k,
                                           VectorInitRecipe recipe, SplitMix64& rng) {
  const std::int64_t grid = std::int64_t{1} << kCoordinateGridBits;
  const std::int64_t range = static_cast<std::int64_t>(kVectorLabelRange) * grid;
  auto draw = [&]() {
    const std::int64_t m = static_cast<std::int64_t>(rng.bounded(2 * static_cast<std::uint64_t>(range) + 1));
    return static_cast<double>(m - range) / static_cast<double>(grid);
  };

  std::vector<Vec> config(n, Vec(k));
  switch (recipe) {
    case VectorInitRecipe::kUniform:
      for (Vec& x : config) {
        for (std::size_t j = 0; j < k; ++j) x[j] = draw();
      }
      break;
    case VectorInitRecipe::kAllEqual: {
      Vec shared(k);
      for (std::size_t j = 0; j < k; ++j) shared[j] = draw();
      for (Vec& x : config) x = shared;
      break;
    }
    case VectorInitRecipe::kSingleOutlier: {
      const std::size_t outlier = static_cast<std::size_t>(rng.bounded(n));
      for (std::size_t j = 0; j < k; ++j) config[outlier][j] = kVectorLabelRange;
      break;
    }
  }
  return config;
}

// Stop-rule monitor: tracks, per coordinate, how many agents attain the
// (constant) maximum offset; converged when all do in every coordinate.
class VectorConvergedMonitor {
 public:
  VectorConvergedMonitor(const std::vector<Vec>& states, const GroundTruth& gt, double tol)
      : states_(&states), gt_(&gt), tol_(tol), member_(states.size(), 0),
        counts_(gt.dim(), 0), m_(compute_offsets(states, gt)) {
    for (std::size_t i = 0; i < states.size(); ++i) refresh(i);
  }

  void on_change(std::size_t i) { refresh(i); }

  bool converged() const {
    for (std::size_t j = 0; j < counts_.size(); ++j) {
      if (counts_[j] != states_->size()) return false;
    }
    return true;
  }

  const Vec& max_offsets() const { return m_; }

 private:
  void refresh(std::size_t i) {
    const std::size_t k = gt_->dim();
    std::uint8_t bits = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const double off = (*states_)[i][j] - gt_->position(i)[j];
      if (within_tol(off, m_[j], tol_, std::abs(m_[j]))) bits |= static_cast<std::uint8_t>(1u << j);
    }
    const std::uint8_t old = member_[i];
    if (old == bits) return;
    for (std::size_t j = 0; j < k; ++j) {
      const std::uint8_t mask = static_cast<std::uint8_t>(1u << j);
      if ((bits & mask) && !(old & mask)) ++counts_[j];
      if (!(bits & mask) && (old & mask)) --counts_[j];
    }
    member_[i] = bits;
  }

  const std::vector<Vec>* states_;
  const GroundTruth* gt_;
  double tol_;
  std::vector<std::uint8_t> member_;
  std::vector<std::size_t> counts_;
  Vec m_;
};

}  // namespace poploc

#endif  // POPLOC_VECTOR_LOC_HPP
