#ifndef POPLOC_LEADER_LOC_HPP
#define POPLOC_LEADER_LOC_HPP

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "poploc/engine.hpp"
#include "poploc/geometry.hpp"

namespace poploc {

// A protocol invariant that should be unreachable was violated (e.g. a
// blue's contact list matches the registry in length but not as a set).
// Plain leader-based runs abort on it; the self-stabilising wrapper
// treats it as an anomaly.
struct ProtocolDiagnosticError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The leader's label is fixed at the origin; the registry holds the
// approved greens' (label, leader-distance) pairs in approval order.
struct LeaderState {
  AnchorList registry;

  friend bool operator==(const LeaderState&, const LeaderState&) = default;
};

struct BlueState {
  AnchorList contacts;  // distinct green contacts, leader included as the origin entry
  std::optional<double> leader_distance;

  friend bool operator==(const BlueState&, const BlueState&) = default;
};

struct GreenState {
  Vec label;  // stabilised hypothetical coordinate; never modified again

  friend bool operator==(const GreenState&, const GreenState&) = default;
};

// Improved 1-D protocol only: one green contact seen so far, so the
// position is one of {anchor - dist, anchor + dist}.
struct GreenishState {
  double anchor = 0.0;
  double dist = 0.0;

  friend bool operator==(const GreenishState&, const GreenishState&) = default;
};

using Role = std::variant<LeaderState, BlueState, GreenState, GreenishState>;

inline bool is_leader(const Role& r) { return std::holds_alternative<LeaderState>(r); }
inline bool is_blue(const Role& r) { return std::holds_alternative<BlueState>(r); }
inline bool is_green(const Role& r) { return std::holds_alternative<GreenState>(r); }
inline bool is_greenish(const Role& r) { return std::holds_alternative<GreenishState>(r); }

// Leader and green agents both carry a fixed label.
inline bool has_label(const Role& r) { return is_leader(r) || is_green(r); }

inline Vec role_label(const Role& r, std::size_t k) {
  if (is_leader(r)) return Vec::zero(k);
  return std::get<GreenState>(r).label;
}

namespace detail {

inline bool same_position(const Vec& a, const Vec& b, double tol) {
  return within_tol(distance(a, b), 0.0, tol, a.norm());
}

inline bool is_origin_entry(const Anchor& a, double tol) {
  return within_tol(a.position.norm(), 0.0, tol, 1.0);
}

}  // namespace detail

// Transition function of the leader-based positioning protocol in k
// dimensions under symmetric distance queries. Rules, in order:
//   (a) part-1 approval: the leader (registry size i < k) approves a blue
//       whose green contacts match the registry exactly; the blue is
//       placed by subspace positioning and appended to the registry;
//   (b) contact collection: a blue appends an unseen (label, distance) of
//       any labelled partner, the leader acting as the green at the origin;
//   (c) part-2 positioning: on the (k+1)-th distinct contact the blue
//       multilaterates its exact position and turns green.
// Green-green and leader-green interactions change nothing.
class PositioningProtocol {
 public:
  using State = Role;
  static constexpr QueryModel kQueryModel = QueryModel::kSymmetricDistance;
  static constexpr bool kUsesQuery = true;

  PositioningProtocol(std::size_t k, double tol) : k_(k), tol_(tol) {
    if (k == 0 || k > kMaxDim) throw std::invalid_argument("PositioningProtocol: bad dimension");
  }

  std::size_t dimension() const { return k_; }
  double tolerance() const { return tol_; }

  bool step(Role& u, Role& v, double d) const {
    if (is_leader(u) && is_leader(v)) {
      throw ProtocolDiagnosticError("two leaders in one interaction");
    }
    if (is_leader(u) && is_blue(v) && try_approve(u, v, d)) return true;
    if (is_leader(v) && is_blue(u) && try_approve(v, u, d)) return true;

    if (is_blue(u) && has_label(v)) return collect(u, v, d);
    if (is_blue(v) && has_label(u)) return collect(v, u, d);
    return false;
  }

 private:
  // Clause (a). Returns false when the guard does not fire so the
  // interaction falls through to contact collection.
  bool try_approve(Role& leader_role, Role& blue_role, double d) const {
    LeaderState& leader = std::get<LeaderState>(leader_role);
    const BlueState& blue = std::get<BlueState>(blue_role);
    const std::size_t i = leader.registry.size();
    if (i >= k_) return false;

    // The blue's contact set, leader entry excluded, must equal the
    // registry's position set. During part 1 the only greens are the
    // registered ones, so equal counts imply equal sets; anything else
    // is a broken invariant.
    std::size_t non_origin = 0;
    for (const Anchor& c : blue.contacts) {
      if (!detail::is_origin_entry(c, tol_)) ++non_origin;
    }
    if (non_origin != i) return false;

    std::array<Anchor, kMaxDim + 1> anchors{};
    anchors[0] = Anchor{Vec::zero(k_), d};
    for (std::size_t j = 0; j < i; ++j) {
      const Vec& pos = leader.registry[j].position;
      bool found = false;
      for (const Anchor& c : blue.contacts) {
        if (detail::is_origin_entry(c, tol_)) continue;
        if (detail::same_position(c.position, pos, tol_)) {
          anchors[j + 1] = Anchor{pos, c.dist};
          found = true;
          break;
        }
      }
      if (!found) {
        throw ProtocolDiagnosticError(
            "approval guard: contact list matches registry in size but not as a set");
      }
    }

    Vec label;
    try {
      label = position_in_subspace({anchors.data(), i + 1}, i, k_, tol_);
    } catch (const DegenerateGeometryError&) {
      return false;  // unusable frame for this candidate; approval can recur
    }
    // Keep the part-1 frame well-spread: a cramped registry would degrade
    // every later positioning built on it.
    const double floor = min_anchor_separation(std::max(label.norm(), d));
    if (label.norm() < floor) return false;
    for (const Anchor& r : leader.registry) {
      if (distance(label, r.position) < floor) return false;
    }
    blue_role = GreenState{label};
    leader.registry.push_back(Anchor{label, d});
    return true;
  }

  // Clauses (b) and (c). A contact too close to one already held, or one
  // that would complete a numerically degenerate anchor set, is rejected:
  // the agent stays blue and waits for a better-placed green, which
  // general position makes plentiful.
  bool collect(Role& blue_role, const Role& labelled, double d) const {
    BlueState& blue = std::get<BlueState>(blue_role);
    const Vec label = role_label(labelled, k_);
    const double floor = min_anchor_separation(std::max(label.norm(), d));
    for (const Anchor& c : blue.contacts) {
      if (distance(c.position, label) < floor) return false;
    }
    if (blue.contacts.size() == k_) {
      AnchorList anchors = blue.contacts;
      anchors.push_back(Anchor{label, d});
      Vec x;
      try {
        x = multilaterate(anchors.span(), k_, tol_);
      } catch (const DegenerateGeometryError&) {
        return false;
      }
      blue_role = GreenState{x};
      return true;
    }
    blue.contacts.push_back(Anchor{label, d});
    if (is_leader(labelled)) blue.leader_distance = d;
    return true;
  }

  std::size_t k_;
  double tol_;
};

// Candidate resolution for two greenish agents: enumerate the four sign
// combinations, keep those compatible with the measured distance, and
// resolve an agent when every survivor agrees on its candidate. The two
// unresolvable cases are a shared green contact and equal distances on
// the same side.
inline std::pair<std::optional<double>, std::optional<double>> resolve_greenish_pair(
    double g_u, double d_u, double g_v, double d_v, double d_uv, double tol) {
  if (d_u <= 0.0 || d_v <= 0.0) throw std::invalid_argument("resolve_greenish_pair: distances must be positive");
  bool u_plus = false, u_minus = false, v_plus = false, v_minus = false;
  int survivors = 0;
  for (const double su : {1.0, -1.0}) {
    for (const double sv : {1.0, -1.0}) {
      const double xu = g_u + su * d_u;
      const double xv = g_v + sv * d_v;
      if (within_tol(std::abs(xu - xv), d_uv, tol, std::abs(d_uv))) {
        ++survivors;
        (su > 0 ? u_plus : u_minus) = true;
        (sv > 0 ? v_plus : v_minus) = true;
      }
    }
  }
  if (survivors == 0) {
    throw InconsistentAnchorsError("resolve_greenish_pair: no sign combination fits the distance");
  }
  std::optional<double> xu, xv;
  if (u_plus != u_minus) xu = g_u + (u_plus ? d_u : -d_u);
  if (v_plus != v_minus) xv = g_v + (v_plus ? d_v : -d_v);
  return {xu, xv};
}

// Improved 1-D protocol: extends the k=1 positioning protocol by turning
// a blue's first green contact into the greenish state and positioning
// greenish agents against a second distinct green or against each other.
class ImprovedLineProtocol {
 public:
  using State = Role;
  static constexpr QueryModel kQueryModel = QueryModel::kSymmetricDistance;
  static constexpr bool kUsesQuery = true;

  explicit ImprovedLineProtocol(double tol) : tol_(tol) {}

  double tolerance() const { return tol_; }

  bool step(Role& u, Role& v, double d) const {
    if (is_leader(u) && is_leader(v)) {
      throw ProtocolDiagnosticError("two leaders in one interaction");
    }
    if (is_leader(u) && is_blue(v) && try_approve(u, v, d)) return true;
    if (is_leader(v) && is_blue(u) && try_approve(v, u, d)) return true;

    if (is_blue(u) && has_label(v)) return to_greenish(u, v, d);
    if (is_blue(v) && has_label(u)) return to_greenish(v, u, d);

    if (is_greenish(u) && has_label(v)) return position_against_green(u, v, d);
    if (is_greenish(v) && has_label(u)) return position_against_green(v, u, d);

    if (is_greenish(u) && is_greenish(v)) {
      const GreenishState& gu = std::get<GreenishState>(u);
      const GreenishState& gv = std::get<GreenishState>(v);
      const auto [xu, xv] = resolve_greenish_pair(gu.anchor, gu.dist, gv.anchor, gv.dist, d, tol_);
      bool changed = false;
      if (xu) {
        u = GreenState{Vec{*xu}};
        changed = true;
      }
      if (xv) {
        v = GreenState{Vec{*xv}};
        changed = true;
      }
      return changed;
    }
    return false;
  }

 private:
  bool try_approve(Role& leader_role, Role& blue_role, double d) const {
    LeaderState& leader = std::get<LeaderState>(leader_role);
    if (leader.registry.size() != 0) return false;
    const Vec label{d};
    blue_role = GreenState{label};
    leader.registry.push_back(Anchor{label, d});
    return true;
  }

  bool to_greenish(Role& blue_role, const Role& labelled, double d) const {
    const Vec label = role_label(labelled, 1);
    blue_role = GreenishState{label[0], d};
    return true;
  }

  bool position_against_green(Role& greenish_role, const Role& labelled, double d) const {
    const GreenishState& g = std::get<GreenishState>(greenish_role);
    const Vec label = role_label(labelled, 1);
    if (within_tol(std::abs(label[0] - g.anchor), 0.0, tol_, std::abs(g.anchor))) {
      return false;  // same green contact, nothing learnt
    }
    const std::array<Anchor, 2> anchors{Anchor{Vec{g.anchor}, g.dist}, Anchor{label, d}};
    Vec x;
    try {
      x = multilaterate({anchors.data(), anchors.size()}, 1, tol_);
    } catch (const DegenerateGeometryError&) {
      return false;  // anchors too close together to separate the candidates
    }
    greenish_role = GreenState{x};
    return true;
  }

  double tol_;
};

// Initial configuration for the leader-based protocols: a designated
// leader, everyone else blue with nothing collected.
inline std::vector<Role> make_positioning_config(std::size_t n, std::size_t leader_index) {
  if (leader_index >= n) throw std::invalid_argument("make_positioning_config: leader index out of range");
  std::vector<Role> config(n, Role{BlueState{}});
  config[leader_index] = LeaderState{};
  return config;
}

// Ground-truth convergence oracle: every agent carries a label, the
// leader's label is the origin, and sampled pairwise label distances
// agree with the true distances (existence of an isometry fixing the
// origin, checked through distance preservation). All pairs are checked
// for small populations, a deterministic sample of strides otherwise.
inline bool oracle_localized(const std::vector<Role>& config, const GroundTruth& gt, double tol) {
  const std::size_t n = config.size();
  const std::size_t k = gt.dim();
  for (const Role& r : config) {
    if (!has_label(r)) return false;
  }
  if (gt.leader_index() && !is_leader(config[*gt.leader_index()])) {
    const Vec label = role_label(config[*gt.leader_index()], k);
    if (!within_tol(label.norm(), 0.0, tol, 1.0)) return false;
  }

  auto pair_ok = [&](std::size_t a, std::size_t b) {
    const double true_d = gt.distance(a, b);
    const double label_d = distance(role_label(config[a], k), role_label(config[b], k));
    return within_tol(label_d, true_d, tol, true_d);
  };

  if (n <= 128) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        if (!pair_ok(a, b)) return false;
      }
    }
    return true;
  }
  const std::size_t leader = gt.leader_index().value_or(0);
  for (std::size_t a = 0; a < n; ++a) {
    if (a != leader && !pair_ok(a, leader)) return false;
    const std::size_t next = (a + 1) % n;
    if (next != a && !pair_ok(a, next)) return false;
    const std::size_t stride = (a + 7) % n;
    if (stride != a && !pair_ok(a, stride)) return false;
  }
  return true;
}

// Stop-rule monitor for the leader-based protocols: counts labelled
// agents and, once everyone is labelled, re-checks the gauge-aware
// oracle after any further change.
class LocalizedMonitor {
 public:
  LocalizedMonitor(const std::vector<Role>& states, const GroundTruth& gt, double oracle_tol)
      : states_(&states), gt_(&gt), tol_(oracle_tol), labelled_(states.size(), 0) {
    for (std::size_t i = 0; i < states.size(); ++i) {
      labelled_[i] = has_label(states[i]) ? 1 : 0;
      count_ += labelled_[i];
    }
  }

  void on_change(std::size_t i) {
    const char g = has_label((*states_)[i]) ? 1 : 0;
    count_ += g - labelled_[i];
    labelled_[i] = g;
    dirty_ = true;
  }

  bool converged() {
    if (count_ != states_->size()) return false;
    if (dirty_) {
      ok_ = oracle_localized(*states_, *gt_, tol_);
      dirty_ = false;
    }
    return ok_;
  }

 private:
  const std::vector<Role>* states_;
  const GroundTruth* gt_;
  double tol_;
  std::vector<char> labelled_;
  std::size_t count_ = 0;
  bool dirty_ = true;
  bool ok_ = false;
};

}  // namespace poploc

#endif  // POPLOC_LEADER_LOC_HPP
