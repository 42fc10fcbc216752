#ifndef POPLOC_EPIDEMICS_HPP
#define POPLOC_EPIDEMICS_HPP

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "poploc/engine.hpp"
#include "poploc/rng.hpp"

namespace poploc {

// Standalone k-contact epidemic: a blue agent turns green after meeting k
// distinct green agents. Distinctness is observed through simulator-issued
// agent tokens; in the localisation protocols the same role is played by
// labels, so the tokens are an explicit modelling device and the one
// sanctioned breach of the anonymity contract.
inline constexpr std::size_t kMaxContactThreshold = 8;

enum class Colour : std::uint8_t { kBlue = 0, kGreen = 1 };

class TokenList {
 public:
  static constexpr std::size_t kCapacity = kMaxContactThreshold - 1;

  std::size_t size() const { return size_; }

  bool contains(std::uint32_t t) const {
    for (std::size_t i = 0; i < size_; ++i) {
      if (t_[i] == t) return true;
    }
    return false;
  }

  void push_back(std::uint32_t t) {
    if (size_ == kCapacity) throw std::length_error("TokenList: capacity exceeded");
    t_[size_++] = t;
  }

  void clear() {
    t_ = {};
    size_ = 0;
  }

  friend bool operator==(const TokenList&, const TokenList&) = default;

 private:
  std::array<std::uint32_t, kCapacity> t_{};
  std::size_t size_ = 0;
};

struct EpidemicState {
  Colour colour = Colour::kBlue;
  std::uint32_t token = 0;  // own identity, fixed for the whole run
  TokenList contacts;       // green agents met so far; empty once green

  friend bool operator==(const EpidemicState&, const EpidemicState&) = default;
};

class KContactProtocol {
 public:
  using State = EpidemicState;
  static constexpr QueryModel kQueryModel = QueryModel::kSymmetricDistance;
  static constexpr bool kUsesQuery = false;  // transitions ignore geometry

  explicit KContactProtocol(std::size_t k) : k_(k) {
    if (k == 0 || k > kMaxContactThreshold) {
      throw std::invalid_argument("KContactProtocol: threshold out of range");
    }
  }

  std::size_t threshold() const { return k_; }

  // Symmetric communication: the rule fires in both directions, judged on
  // the pre-interaction colours.
  bool step(State& u, State& v, double) const {
    const Colour cu = u.colour;
    const Colour cv = v.colour;
    bool changed = false;
    if (cu == Colour::kBlue && cv == Colour::kGreen) changed |= absorb(u, v.token);
    if (cv == Colour::kBlue && cu == Colour::kGreen) changed |= absorb(v, u.token);
    return changed;
  }

 private:
  bool absorb(State& s, std::uint32_t token) const {
    if (s.contacts.contains(token)) return false;
    if (s.contacts.size() + 1 == k_) {
      s.colour = Colour::kGreen;
      s.contacts.clear();
    } else {
      s.contacts.push_back(token);
    }
    return true;
  }

  std::size_t k_;
};

inline bool epidemic_complete(const std::vector<EpidemicState>& config) {
  for (const EpidemicState& s : config) {
    if (s.colour != Colour::kGreen) return false;
  }
  return true;
}

// Initial configuration with exactly `greens` green agents chosen
// uniformly (Floyd's sampling: a fixed number of draws).
inline std::vector<EpidemicState> make_kcontact_config(std::size_t n, std::size_t greens,
                                                       SplitMix64& rng) {
  if (greens > n) throw std::invalid_argument("make_kcontact_config: more greens than agents");
  std::vector<EpidemicState> config(n);
  for (std::size_t i = 0; i < n; ++i) config[i].token = static_cast<std::uint32_t>(i);
  std::vector<char> chosen(n, 0);
  for (std::size_t j = n - greens; j < n; ++j) {
    const std::size_t t = static_cast<std::size_t>(rng.bounded(j + 1));
    if (chosen[t]) {
      chosen[j] = 1;
    } else {
      chosen[t] = 1;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (chosen[i]) config[i].colour = Colour::kGreen;
  }
  return config;
}

// Stop-rule monitor: all agents green.
class EpidemicCompleteMonitor {
 public:
  explicit EpidemicCompleteMonitor(const std::vector<EpidemicState>& states)
      : states_(&states), green_(states.size(), 0) {
    for (std::size_t i = 0; i < states.size(); ++i) {
      green_[i] = states[i].colour == Colour::kGreen ? 1 : 0;
      count_ += green_[i];
    }
  }

  void on_change(std::size_t i) {
    const char g = (*states_)[i].colour == Colour::kGreen ? 1 : 0;
    count_ += g - green_[i];
    green_[i] = g;
  }

  bool converged() const { return count_ == states_->size(); }

 private:
  const std::vector<EpidemicState>* states_;
  std::vector<char> green_;
  std::size_t count_ = 0;
};

}  // namespace poploc

#endif  // POPLOC_EPIDEMICS_HPP
