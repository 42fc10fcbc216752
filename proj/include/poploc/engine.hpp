#ifndef POPLOC_ENGINE_HPP
#define POPLOC_ENGINE_HPP

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "poploc/geometry.hpp"
#include "poploc/rng.hpp"
#include "poploc/vec.hpp"

namespace poploc {

enum class QueryModel { kSymmetricDistance, kInitiatorVector };

// Hidden true positions. Protocol transitions never see this object; only
// the scheduler's query evaluation and the test oracles read it.
class GroundTruth {
 public:
  GroundTruth(std::size_t dim, std::vector<Vec> positions,
              std::optional<std::size_t> leader_index = std::nullopt)
      : dim_(dim), positions_(std::move(positions)), leader_index_(leader_index) {
    if (dim_ == 0 || dim_ > kMaxDim) throw std::invalid_argument("GroundTruth: bad dimension");
    for (const Vec& p : positions_) {
      if (p.dim() != dim_) throw std::invalid_argument("GroundTruth: position dimension mismatch");
    }
    if (leader_index_ && *leader_index_ >= positions_.size()) {
      throw std::invalid_argument("GroundTruth: leader index out of range");
    }
    check_distinct();
  }

  std::size_t size() const { return positions_.size(); }
  std::size_t dim() const { return dim_; }
  const Vec& position(std::size_t i) const { return positions_[i]; }
  const std::vector<Vec>& positions() const { return positions_; }
  std::optional<std::size_t> leader_index() const { return leader_index_; }

  double distance(std::size_t i, std::size_t r) const {
    return poploc::distance(positions_[i], positions_[r]);
  }

  // Vector spanning the initiator's and responder's points: p_r - p_i.
  Vec displacement(std::size_t i, std::size_t r) const {
    return positions_[r] - positions_[i];
  }

 private:
  void check_distinct() const {
    std::vector<std::size_t> idx(positions_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    auto less = [&](std::size_t a, std::size_t b) {
      for (std::size_t c = 0; c < dim_; ++c) {
        if (positions_[a][c] != positions_[b][c]) return positions_[a][c] < positions_[b][c];
      }
      return false;
    };
    std::sort(idx.begin(), idx.end(), less);
    for (std::size_t i = 1; i < idx.size(); ++i) {
      if (positions_[idx[i - 1]] == positions_[idx[i]]) {
        throw std::invalid_argument("GroundTruth: duplicate positions at agents " +
                                    std::to_string(idx[i - 1]) + " and " + std::to_string(idx[i]));
      }
    }
  }

  std::size_t dim_;
  std::vector<Vec> positions_;
  std::optional<std::size_t> leader_index_;
};

inline std::variant<double, Vec> evaluate_query(const GroundTruth& gt, std::size_t i,
                                                std::size_t r, QueryModel model) {
  if (i == r) throw std::invalid_argument("evaluate_query: i and r must differ");
  if (model == QueryModel::kSymmetricDistance) return gt.distance(i, r);
  return gt.displacement(i, r);
}

// Ordered (initiator, responder) pair, uniform over the n(n-1)
// possibilities. Exactly two bounded draws per call.
inline std::pair<std::size_t, std::size_t> schedule_pair(SplitMix64& rng, std::size_t n) {
  if (n < 2) throw std::invalid_argument("schedule_pair: need n >= 2");
  const std::size_t i = static_cast<std::size_t>(rng.bounded(n));
  std::size_t r = static_cast<std::size_t>(rng.bounded(n - 1));
  if (r >= i) ++r;
  return {i, r};
}

struct TrialResult {
  std::uint64_t interactions = 0;
  std::uint64_t last_change_interaction = 0;
  double parallel_time = 0.0;  // last_change_interaction / n
  bool converged = false;
  bool silence_verified = false;
  std::map<std::string, std::string> extras;

  friend bool operator==(const TrialResult&, const TrialResult&) = default;
};

// A protocol supplies its per-agent state type, the query model it runs
// under, and a pure transition on (initiator, responder, datum) that
// reports whether either state changed.
template <class P>
concept Protocol = requires(const P p, typename P::State& u, typename P::State& v) {
  typename P::State;
  { P::kQueryModel } -> std::convertible_to<QueryModel>;
  { P::kUsesQuery } -> std::convertible_to<bool>;
};

template <class P>
using Configuration = std::vector<typename P::State>;

// Convergence monitors are the simulator-side stop rule: they watch state
// changes and answer the (ground-truth) convergence predicate. They are a
// measurement facility; agents themselves never know the run is over.
template <class M>
concept ConvergenceMonitor = requires(M m, std::size_t i) {
  m.on_change(i);
  { m.converged() } -> std::convertible_to<bool>;
};

// A protocol transition fault, annotated with the interaction context so
// degenerate inputs are reported with the agent indices involved.
struct TrialAbortError : std::runtime_error {
  TrialAbortError(std::uint64_t interaction, std::size_t a, std::size_t b, const std::string& what)
      : std::runtime_error("interaction " + std::to_string(interaction) + " between agents " +
                           std::to_string(a) + " and " + std::to_string(b) + ": " + what) {}
};

// Applies one interaction (initiator a, responder b) with its true query
// datum. Returns whether any state changed. Exposed so tests can drive
// recorded schedules directly.
template <Protocol P>
bool apply_interaction(const P& proto, const GroundTruth& gt,
                       Configuration<P>& states, std::size_t a, std::size_t b) {
  if constexpr (!P::kUsesQuery) {
    return proto.step(states[a], states[b], 0.0);
  } else if constexpr (P::kQueryModel == QueryModel::kSymmetricDistance) {
    return proto.step(states[a], states[b], gt.distance(a, b));
  } else {
    return proto.step(states[a], states[b], gt.displacement(a, b));
  }
}

// Runs one seeded trial until the monitor's predicate holds or the
// interaction budget is exhausted. The configuration is advanced in
// place; parallel time is the index of the last state-changing
// interaction divided by n.
template <Protocol P, ConvergenceMonitor M>
TrialResult run_trial(const P& proto, const GroundTruth& gt, Configuration<P>& states,
                      SplitMix64& rng, M& monitor, std::uint64_t max_interactions) {
  if (states.size() != gt.size()) throw std::invalid_argument("run_trial: configuration size mismatch");
  const std::size_t n = states.size();

  TrialResult result;
  if (monitor.converged()) {
    result.converged = true;
    return result;
  }
  if (n < 2) return result;

  while (result.interactions < max_interactions) {
    const auto [a, b] = schedule_pair(rng, n);
    ++result.interactions;
    bool changed;
    try {
      changed = apply_interaction(proto, gt, states, a, b);
    } catch (const std::exception& e) {
      throw TrialAbortError(result.interactions, a, b, e.what());
    }
    if (changed) {
      result.last_change_interaction = result.interactions;
      monitor.on_change(a);
      monitor.on_change(b);
      if (monitor.converged()) {
        result.converged = true;
        break;
      }
    }
  }
  result.parallel_time = static_cast<double>(result.last_change_interaction) / static_cast<double>(n);
  return result;
}

// True iff no ordered pair's transition would change either state: the
// configuration is silent. Applies the transition to copies and compares
// values, so it does not rely on the protocol's own change reporting.
template <Protocol P>
bool verify_silence(const P& proto, const GroundTruth& gt, const Configuration<P>& states) {
  const std::size_t n = states.size();
  using State = typename P::State;
  State u{}, v{};
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      u = states[a];
      v = states[b];
      bool changed;
      if constexpr (!P::kUsesQuery) {
        changed = proto.step(u, v, 0.0);
      } else if constexpr (P::kQueryModel == QueryModel::kSymmetricDistance) {
        changed = proto.step(u, v, gt.distance(a, b));
      } else {
        changed = proto.step(u, v, gt.displacement(a, b));
      }
      if (changed || !(u == states[a]) || !(v == states[b])) return false;
    }
  }
  return true;
}

// Monitor adaptor for a plain configuration predicate; re-evaluates only
// when a change has been observed since the last answer.
template <class Pred>
class PredicateMonitor {
 public:
  PredicateMonitor(Pred pred, bool initial) : pred_(std::move(pred)), value_(initial) {}

  void on_change(std::size_t) { dirty_ = true; }

  bool converged() {
    if (dirty_) {
      value_ = pred_();
      dirty_ = false;
    }
    return value_;
  }

 private:
  Pred pred_;
  bool value_;
  bool dirty_ = false;
};

template <class Pred>
PredicateMonitor<Pred> make_predicate_monitor(Pred pred) {
  const bool initial = pred();
  return PredicateMonitor<Pred>(std::move(pred), initial);
}

// Never converges: used to extend runs past stabilisation when checking
// that states are frozen.
struct NullMonitor {
  void on_change(std::size_t) {}
  bool converged() const { return false; }
};

}  // namespace poploc

#endif  // POPLOC_ENGINE_HPP
