#ifndef POPLOC_SELFSTAB_HPP
#define POPLOC_SELFSTAB_HPP

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "poploc/engine.hpp"
#include "poploc/leader_loc.hpp"
#include "poploc/rng.hpp"

namespace poploc {

// Protocol constants. Agents are granted knowledge of log n: the election
// length L = ceil(log2 n) biases the per-agent leader probability to at
// most 1/n, and the buffer line has 2*D*L states (the first D*L red).
// The deadline bounds a blue agent's own interactions by the expected
// stabilisation time of the underlying positioning protocol.
struct SelfStabParams {
  std::size_t k = 1;
  std::size_t election_length = 1;       // L
  std::size_t buffer_d = 3;              // D
  std::uint32_t deadline_threshold = 1;  // own-interaction budget for blues
  double tol = 1e-9;

  static SelfStabParams make(std::size_t n, std::size_t k, std::size_t buffer_d = 3,
                             double deadline_c = 16.0, double tol = 1e-9) {
    if (n < 2) throw std::invalid_argument("SelfStabParams: need n >= 2");
    SelfStabParams p;
    p.k = k;
    p.election_length = static_cast<std::size_t>(std::bit_width(n - 1));  // ceil(log2 n)
    p.buffer_d = buffer_d;
    const double nd = static_cast<double>(n);
    const double bound = std::pow(nd, static_cast<double>(k) / (k + 1)) *
                         std::pow(std::log(nd), 1.0 / (k + 1));
    p.deadline_threshold = static_cast<std::uint32_t>(std::ceil(deadline_c * bound));
    p.tol = tol;
    return p;
  }

  std::uint32_t line_length() const {
    return static_cast<std::uint32_t>(2 * buffer_d * election_length);
  }
  std::uint32_t red_zone_end() const {
    return static_cast<std::uint32_t>(buffer_d * election_length);
  }
};

// Coin attribute (H|T|N). Retained across phase changes so pending coin
// tosses stay fair; reset to neutral on buffer departure.
enum class Coin : std::uint8_t { kN, kH, kT };

struct BufferPhase {
  std::uint32_t index = 1;  // 1..2DL; red iff index <= DL

  friend bool operator==(const BufferPhase&, const BufferPhase&) = default;
};

enum class ElectionStatus : std::uint8_t { kCounting, kLeader, kFollower };

struct ElectionPhase {
  ElectionStatus status = ElectionStatus::kCounting;
  std::uint32_t counter = 1;  // 1..L while counting

  friend bool operator==(const ElectionPhase&, const ElectionPhase&) = default;
};

struct LocalisePhase {
  Role role;
  std::uint32_t deadline = 0;  // own interactions; blue agents only

  friend bool operator==(const LocalisePhase&, const LocalisePhase&) = default;
};

struct SelfStabState {
  Coin coin = Coin::kN;
  std::variant<BufferPhase, ElectionPhase, LocalisePhase> phase;

  friend bool operator==(const SelfStabState&, const SelfStabState&) = default;
};

inline bool on_line(const SelfStabState& s) { return std::holds_alternative<BufferPhase>(s.phase); }
inline bool in_election(const SelfStabState& s) { return std::holds_alternative<ElectionPhase>(s.phase); }
inline bool in_localise(const SelfStabState& s) { return std::holds_alternative<LocalisePhase>(s.phase); }

inline bool is_localise_labelled(const SelfStabState& s) {
  return in_localise(s) && has_label(std::get<LocalisePhase>(s.phase).role);
}

inline bool is_localise_blue(const SelfStabState& s) {
  return in_localise(s) && is_blue(std::get<LocalisePhase>(s.phase).role);
}

// The self-stabilising round machine. Buffer rules take precedence, then
// election rules, then localisation with anomaly detection:
//  - progress on the line:   X_i + X_j -> X_{min(i,j)+1} twice (capped);
//  - reset propagation:      red X_i meets a non-line agent, both to X_1;
//  - departure:              two agents at X_{2DL}, or a white agent
//                            meeting a non-line agent, leave to (N, 1);
//  - pairing:                two neutral election agents become H and T
//                            (initiator heads);
//  - coin toss:              a counting initiator advances on H (Leader at
//                            L), becomes Follower on T;
//  - role start:             Leader -> green leader at the origin,
//                            Follower -> blue with a fresh deadline;
//  - localisation:           delegates to the positioning protocol; label
//                            inconsistency between two labelled agents,
//                            a geometry fault, or an expired deadline is
//                            an anomaly sending the participants to X_1.
class SelfStabProtocol {
 public:
  using State = SelfStabState;
  static constexpr QueryModel kQueryModel = QueryModel::kSymmetricDistance;
  static constexpr bool kUsesQuery = true;

  explicit SelfStabProtocol(const SelfStabParams& params)
      : p_(params), alg1_(params.k, params.tol) {}

  const SelfStabParams& params() const { return p_; }

  bool step(State& u, State& v, double d) const {
    bool changed = false;
    changed |= start_role(u);
    changed |= start_role(v);

    const bool ul = on_line(u);
    const bool vl = on_line(v);
    if (ul && vl) return line_pair(u, v) || changed;
    if (ul || vl) return line_single(ul ? u : v, ul ? v : u) || changed;

    // Pairing keeps the H/T coin counts equal by construction.
    if (in_election(u) && in_election(v) && u.coin == Coin::kN && v.coin == Coin::kN) {
      u.coin = Coin::kH;
      v.coin = Coin::kT;
      return true;
    }

    // An agent converted by this interaction's coin toss starts
    // localising from the next interaction on, so the localisation branch
    // is gated on the phases seen here.
    const bool u_localise_pre = in_localise(u);
    const bool v_localise_pre = in_localise(v);
    const bool u_blue_pre = is_localise_blue(u);
    const bool v_blue_pre = is_localise_blue(v);

    // Coin toss: initiator only, and only against a flipped coin.
    if (in_election(u) && (v.coin == Coin::kH || v.coin == Coin::kT)) {
      ElectionPhase& e = std::get<ElectionPhase>(u.phase);
      if (v.coin == Coin::kH) {
        if (e.counter < p_.election_length) {
          ++e.counter;
        } else {
          u.phase = LocalisePhase{Role{LeaderState{}}, 0};
        }
      } else {
        u.phase = LocalisePhase{Role{BlueState{}}, 0};
      }
      changed = true;
    }

    if (u_localise_pre && v_localise_pre) {
      LocalisePhase& lu = std::get<LocalisePhase>(u.phase);
      LocalisePhase& lv = std::get<LocalisePhase>(v.phase);
      if (has_label(lu.role) && has_label(lv.role)) {
        if (!consistent(role_label(lu.role, p_.k), role_label(lv.role, p_.k), d, p_.tol)) {
          reset(u);
          reset(v);
          return true;
        }
      } else {
        try {
          changed |= alg1_.step(lu.role, lv.role, d);
        } catch (const GeometryError&) {
          reset(u);
          reset(v);
          return true;
        } catch (const ProtocolDiagnosticError&) {
          reset(u);
          reset(v);
          return true;
        }
      }
    }

    if (u_blue_pre && is_localise_blue(u)) changed |= tick_deadline(u);
    if (v_blue_pre && is_localise_blue(v)) changed |= tick_deadline(v);
    return changed;
  }

 private:
  // Confirmed election outcomes enter localisation; the coin attribute is
  // kept so the agent still serves as a toss source.
  bool start_role(State& s) const {
    if (!in_election(s)) return false;
    const ElectionPhase& e = std::get<ElectionPhase>(s.phase);
    if (e.status == ElectionStatus::kLeader) {
      s.phase = LocalisePhase{Role{LeaderState{}}, 0};
      return true;
    }
    if (e.status == ElectionStatus::kFollower) {
      s.phase = LocalisePhase{Role{BlueState{}}, 0};
      return true;
    }
    return false;
  }

  bool line_pair(State& u, State& v) const {
    BufferPhase& bu = std::get<BufferPhase>(u.phase);
    BufferPhase& bv = std::get<BufferPhase>(v.phase);
    const std::uint32_t end = p_.line_length();
    if (bu.index == end && bv.index == end) {
      depart(u);
      depart(v);
      return true;
    }
    const std::uint32_t target = std::min(std::min(bu.index, bv.index) + 1, end);
    const bool changed = bu.index != target || bv.index != target;
    bu.index = target;
    bv.index = target;
    return changed;
  }

  bool line_single(State& line, State& other) const {
    const BufferPhase& b = std::get<BufferPhase>(line.phase);
    if (b.index <= p_.red_zone_end()) {
      reset(line);
      reset(other);  // other was not on the line, so this always changes it
      return true;
    }
    depart(line);
    return true;
  }

  void reset(State& s) const { s.phase = BufferPhase{1}; }

  void depart(State& s) const {
    s.coin = Coin::kN;
    s.phase = ElectionPhase{ElectionStatus::kCounting, 1};
  }

  bool tick_deadline(State& s) const {
    LocalisePhase& l = std::get<LocalisePhase>(s.phase);
    ++l.deadline;
    if (l.deadline >= p_.deadline_threshold) reset(s);
    return true;
  }

  SelfStabParams p_;
  PositioningProtocol alg1_;
};

// Convergence oracle: every agent is a labelled localise agent and all
// pairwise labels are consistent with the true distances. Correctness is
// consistency; no particular gauge (such as an agent at the origin) is
// required.
inline bool oracle_selfstab_converged(const std::vector<SelfStabState>& config,
                                      const GroundTruth& gt, double tol) {
  const std::size_t n = config.size();
  const std::size_t k = gt.dim();
  for (const SelfStabState& s : config) {
    if (!is_localise_labelled(s)) return false;
  }
  for (std::size_t a = 0; a < n; ++a) {
    const Vec la = role_label(std::get<LocalisePhase>(config[a].phase).role, k);
    for (std::size_t b = a + 1; b < n; ++b) {
      const Vec lb = role_label(std::get<LocalisePhase>(config[b].phase).role, k);
      if (!consistent(la, lb, gt.distance(a, b), tol)) return false;
    }
  }
  return true;
}

enum class SelfStabRecipe {
  kUniformRandom,
  kConsistentGreens,
  kInconsistentGreens,
  kTwoLeaders,
  kAllBufferRed,
  kExpiredDeadlines,
};

inline SelfStabRecipe parse_selfstab_recipe(const std::string& name) {
  if (name == "uniform-random") return SelfStabRecipe::kUniformRandom;
  if (name == "consistent-greens") return SelfStabRecipe::kConsistentGreens;
  if (name == "inconsistent-greens") return SelfStabRecipe::kInconsistentGreens;
  if (name == "two-leaders") return SelfStabRecipe::kTwoLeaders;
  if (name == "all-buffer-red") return SelfStabRecipe::kAllBufferRed;
  if (name == "expired-deadlines") return SelfStabRecipe::kExpiredDeadlines;
  throw std::invalid_argument("unknown self-stabilisation recipe: " + name);
}

// Adversarial initial configurations. Self-stabilisation makes no
// assumption on the start state; these recipes probe the failure modes
// the protocol must recover from.
inline std::vector<SelfStabState> make_selfstab_config(SelfStabRecipe recipe,
                                                       const GroundTruth& gt,
                                                       const SelfStabParams& params,
                                                       SplitMix64& rng) {
  const std::size_t n = gt.size();
  const std::size_t k = gt.dim();
  std::vector<SelfStabState> config(n);

  auto random_label = [&]() {
    Vec x(k);
    for (std::size_t j = 0; j < k; ++j) x[j] = rng.u01();
    return x;
  };

  switch (recipe) {
    case SelfStabRecipe::kUniformRandom:
      for (SelfStabState& s : config) {
        s.coin = static_cast<Coin>(rng.bounded(3));
        switch (rng.bounded(3)) {
          case 0:
            s.phase = BufferPhase{static_cast<std::uint32_t>(1 + rng.bounded(params.line_length()))};
            break;
          case 1: {
            const std::uint64_t pick = rng.bounded(params.election_length + 2);
            if (pick < params.election_length) {
              s.phase = ElectionPhase{ElectionStatus::kCounting, static_cast<std::uint32_t>(1 + pick)};
            } else if (pick == params.election_length) {
              s.phase = ElectionPhase{ElectionStatus::kLeader, 1};
            } else {
              s.phase = ElectionPhase{ElectionStatus::kFollower, 1};
            }
            break;
          }
          default:
            switch (rng.bounded(3)) {
              case 0:
                s.phase = LocalisePhase{Role{LeaderState{}}, 0};
                break;
              case 1:
                s.phase = LocalisePhase{
                    Role{BlueState{}},
                    static_cast<std::uint32_t>(rng.bounded(params.deadline_threshold))};
                break;
              default:
                s.phase = LocalisePhase{Role{GreenState{random_label()}}, 0};
                break;
            }
            break;
        }
      }
      break;
    case SelfStabRecipe::kConsistentGreens:
      for (std::size_t i = 0; i < n; ++i) {
        config[i].phase = LocalisePhase{Role{GreenState{gt.position(i)}}, 0};
      }
      break;
    case SelfStabRecipe::kInconsistentGreens:
      for (SelfStabState& s : config) {
        s.phase = LocalisePhase{Role{GreenState{random_label()}}, 0};
      }
      break;
    case SelfStabRecipe::kTwoLeaders:
      for (SelfStabState& s : config) s.phase = LocalisePhase{Role{BlueState{}}, 0};
      config[0].phase = LocalisePhase{Role{LeaderState{}}, 0};
      config[1 % n].phase = LocalisePhase{Role{LeaderState{}}, 0};
      break;
    case SelfStabRecipe::kAllBufferRed:
      for (SelfStabState& s : config) {
        s.phase = BufferPhase{static_cast<std::uint32_t>(1 + rng.bounded(params.red_zone_end()))};
      }
      break;
    case SelfStabRecipe::kExpiredDeadlines:
      for (SelfStabState& s : config) {
        s.phase = LocalisePhase{Role{BlueState{}}, params.deadline_threshold};
      }
      break;
  }
  return config;
}

// Clean start for leader-election experiments: everyone neutral at
// counter 1, exactly the state agents hold on leaving the buffer.
inline std::vector<SelfStabState> make_election_config(std::size_t n) {
  return std::vector<SelfStabState>(
      n, SelfStabState{Coin::kN, ElectionPhase{ElectionStatus::kCounting, 1}});
}

inline std::size_t count_leaders(const std::vector<SelfStabState>& config) {
  std::size_t leaders = 0;
  for (const SelfStabState& s : config) {
    if (in_localise(s) && is_leader(std::get<LocalisePhase>(s.phase).role)) ++leaders;
  }
  return leaders;
}

inline std::size_t count_election_phase(const std::vector<SelfStabState>& config) {
  std::size_t c = 0;
  for (const SelfStabState& s : config) {
    if (in_election(s)) ++c;
  }
  return c;
}

// Stop-rule monitor: counts labelled localise agents and re-checks the
// full pairwise-consistency oracle once everyone is labelled. Also counts
// resets (entries into X_1) for the trial's reporting.
class SelfStabConvergedMonitor {
 public:
  SelfStabConvergedMonitor(const std::vector<SelfStabState>& states, const GroundTruth& gt,
                           double tol)
      : states_(&states), gt_(&gt), tol_(tol), labelled_(states.size(), 0),
        at_x1_(states.size(), 0) {
    for (std::size_t i = 0; i < states.size(); ++i) {
      labelled_[i] = is_localise_labelled(states[i]) ? 1 : 0;
      count_ += labelled_[i];
      at_x1_[i] = entering_x1(states[i]) ? 1 : 0;
    }
  }

  void on_change(std::size_t i) {
    const char g = is_localise_labelled((*states_)[i]) ? 1 : 0;
    count_ += g - labelled_[i];
    labelled_[i] = g;
    const char x1 = entering_x1((*states_)[i]) ? 1 : 0;
    if (x1 && !at_x1_[i]) ++resets_;
    at_x1_[i] = x1;
    dirty_ = true;
  }

  bool converged() {
    if (count_ != states_->size()) return false;
    if (dirty_) {
      ok_ = oracle_selfstab_converged(*states_, *gt_, tol_);
      dirty_ = false;
    }
    return ok_;
  }

  std::uint64_t resets() const { return resets_; }

 private:
  static bool entering_x1(const SelfStabState& s) {
    return on_line(s) && std::get<BufferPhase>(s.phase).index == 1;
  }

  const std::vector<SelfStabState>* states_;
  const GroundTruth* gt_;
  double tol_;
  std::vector<char> labelled_;
  std::vector<char> at_x1_;
  std::size_t count_ = 0;
  std::uint64_t resets_ = 0;
  bool dirty_ = true;
  bool ok_ = false;
};

// Election-only monitor: stops when no agent is still in the election
// phase (all have confirmed leader or follower status).
class ElectionDoneMonitor {
 public:
  explicit ElectionDoneMonitor(const std::vector<SelfStabState>& states)
      : states_(&states), in_election_(states.size(), 0) {
    for (std::size_t i = 0; i < states.size(); ++i) {
      in_election_[i] = in_election(states[i]) ? 1 : 0;
      count_ += in_election_[i];
    }
  }

  void on_change(std::size_t i) {
    const char e = in_election((*states_)[i]) ? 1 : 0;
    count_ += e - in_election_[i];
    in_election_[i] = e;
  }

  bool converged() const { return count_ == 0; }

 private:
  const std::vector<SelfStabState>* states_;
  std::vector<char> in_election_;
  std::size_t count_ = 0;
};

}  // namespace poploc

#endif  // POPLOC_SELFSTAB_HPP
