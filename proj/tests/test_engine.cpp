#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "poploc/engine.hpp"
#include "poploc/epidemics.hpp"
#include "poploc/leader_loc.hpp"
#include "poploc/rng.hpp"

using namespace poploc;

namespace {

// Frozen chi-square critical values at significance 1e-3 (computed once
// with an independent statistics package and pinned here).
constexpr double kChi2Crit5 = 20.515005652432873;    // 5 dof
constexpr double kChi2Crit55 = 93.16753277222854;    // 55 dof

std::vector<Vec> grid_positions(std::size_t n) {
  std::vector<Vec> p;
  for (std::size_t i = 0; i < n; ++i) p.push_back(Vec{static_cast<double>(i)});
  return p;
}

// Independent one-way epidemic simulation used as the oracle for the
// engine-level epidemic bracket test: symmetric contact spreading,
// written without any of the library's protocol machinery.
double direct_one_way_epidemic_time(std::size_t n, SplitMix64& rng) {
  std::vector<char> green(n, 0);
  green[0] = 1;
  std::size_t count = 1;
  std::uint64_t t = 0;
  std::uint64_t last = 0;
  while (count < n) {
    ++t;
    const std::size_t a = static_cast<std::size_t>(rng.bounded(n));
    std::size_t b = static_cast<std::size_t>(rng.bounded(n - 1));
    if (b >= a) ++b;
    if (green[a] != green[b]) {
      green[a] = green[b] = 1;
      ++count;
      last = t;
    }
  }
  return static_cast<double>(last) / static_cast<double>(n);
}

}  // namespace

TEST_CASE("schedule_pair basics") {
  SplitMix64 rng(1);
  REQUIRE_THROWS_AS(schedule_pair(rng, 1), std::invalid_argument);

  // n=2: only the two ordered pairs occur.
  int c01 = 0, c10 = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto [a, b] = schedule_pair(rng, 2);
    REQUIRE(a != b);
    REQUIRE(a < 2);
    REQUIRE(b < 2);
    if (a == 0) ++c01; else ++c10;
  }
  REQUIRE(c01 > 0);
  REQUIRE(c10 > 0);
}

TEST_CASE("schedule_pair is deterministic per seed") {
  SplitMix64 a(99), b(99);
  for (int i = 0; i < 1000; ++i) REQUIRE(schedule_pair(a, 5) == schedule_pair(b, 5));
}

TEST_CASE("schedule_pair is uniform over ordered pairs (n=3)") {
  SplitMix64 rng(12345);
  std::array<std::array<long, 3>, 3> counts{};
  const long draws = 60000;
  for (long i = 0; i < draws; ++i) {
    const auto [a, b] = schedule_pair(rng, 3);
    ++counts[a][b];
  }
  const double expected = static_cast<double>(draws) / 6.0;
  double chi2 = 0.0;
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 0; b < 3; ++b) {
      if (a == b) {
        REQUIRE(counts[a][b] == 0);
        continue;
      }
      const double d = static_cast<double>(counts[a][b]) - expected;
      chi2 += d * d / expected;
    }
  }
  REQUIRE(chi2 < kChi2Crit5);
}

TEST_CASE("schedule_pair is uniform over ordered pairs (n=8)") {
  const std::size_t n = 8;
  SplitMix64 rng(777);
  std::array<long, 64> counts{};
  const long draws = 100000;
  for (long i = 0; i < draws; ++i) {
    const auto [a, b] = schedule_pair(rng, n);
    ++counts[a * n + b];
  }
  const double expected = static_cast<double>(draws) / static_cast<double>(n * (n - 1));
  double chi2 = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      const double d = static_cast<double>(counts[a * n + b]) - expected;
      chi2 += d * d / expected;
    }
  }
  REQUIRE(chi2 < kChi2Crit55);
}

TEST_CASE("evaluate_query returns distances and displacement vectors") {
  GroundTruth gt(2, {Vec{0.0, 0.0}, Vec{3.0, 4.0}, Vec{1.0, 1.0}});
  REQUIRE(std::get<double>(evaluate_query(gt, 0, 1, QueryModel::kSymmetricDistance)) == 5.0);
  const Vec v = std::get<Vec>(evaluate_query(gt, 2, 1, QueryModel::kInitiatorVector));
  REQUIRE(v == Vec{2.0, 3.0});
  REQUIRE_THROWS_AS(evaluate_query(gt, 1, 1, QueryModel::kSymmetricDistance),
                    std::invalid_argument);
}

TEST_CASE("ground truth rejects duplicate positions") {
  REQUIRE_THROWS_AS(GroundTruth(1, {Vec{0.5}, Vec{0.25}, Vec{0.5}}), std::invalid_argument);
}

TEST_CASE("already-final configurations converge with zero interactions") {
  GroundTruth gt(1, grid_positions(8));
  KContactProtocol proto(1);
  std::vector<EpidemicState> states(8);
  for (std::size_t i = 0; i < 8; ++i) {
    states[i].token = static_cast<std::uint32_t>(i);
    states[i].colour = Colour::kGreen;
  }
  EpidemicCompleteMonitor monitor(states);
  SplitMix64 rng(3);
  const TrialResult r = run_trial(proto, gt, states, rng, monitor, 1000);
  REQUIRE(r.converged);
  REQUIRE(r.interactions == 0);
  REQUIRE(r.parallel_time == 0.0);
}

TEST_CASE("identical seeds give identical trial results") {
  const std::size_t n = 64;
  GroundTruth gt(1, grid_positions(n));
  KContactProtocol proto(2);
  auto run_once = [&]() {
    SplitMix64 init(5);
    auto states = make_kcontact_config(n, 2, init);
    EpidemicCompleteMonitor monitor(states);
    SplitMix64 rng(6);
    return run_trial(proto, gt, states, rng, monitor, 1u << 22);
  };
  REQUIRE(run_once() == run_once());
}

TEST_CASE("one-contact epidemic matches the direct-simulation bracket") {
  const std::size_t n = 1024;
  const double lo = 0.5 * std::log(static_cast<double>(n));
  const double hi = 8.0 * std::log(static_cast<double>(n));

  // Oracle: the bracket must hold for the direct simulation itself.
  int oracle_in = 0;
  for (int t = 0; t < 100; ++t) {
    SplitMix64 rng = SplitMix64::stream(900, static_cast<std::uint64_t>(t));
    const double time = direct_one_way_epidemic_time(n, rng);
    if (time >= lo && time <= hi) ++oracle_in;
  }
  REQUIRE(oracle_in >= 95);

  GroundTruth gt(1, grid_positions(n));
  KContactProtocol proto(1);
  int in_bracket = 0;
  for (int t = 0; t < 100; ++t) {
    SplitMix64 init = SplitMix64::stream(1000, static_cast<std::uint64_t>(t));
    auto states = make_kcontact_config(n, 1, init);
    EpidemicCompleteMonitor monitor(states);
    SplitMix64 rng = SplitMix64::stream(2000, static_cast<std::uint64_t>(t));
    const TrialResult r = run_trial(proto, gt, states, rng, monitor, 1u << 26);
    REQUIRE(r.converged);
    if (r.parallel_time >= lo && r.parallel_time <= hi) ++in_bracket;
  }
  REQUIRE(in_bracket >= 95);
}

TEST_CASE("verify_silence distinguishes final from active configurations") {
  GroundTruth gt(1, grid_positions(6));
  KContactProtocol proto(1);
  std::vector<EpidemicState> states(6);
  for (std::size_t i = 0; i < 6; ++i) {
    states[i].token = static_cast<std::uint32_t>(i);
    states[i].colour = Colour::kGreen;
  }
  REQUIRE(verify_silence(proto, gt, states));
  states[3].colour = Colour::kBlue;
  REQUIRE_FALSE(verify_silence(proto, gt, states));
}

TEST_CASE("converged configurations stay frozen when the run is extended") {
  const std::size_t n = 128;
  GroundTruth gt(1, grid_positions(n));
  KContactProtocol proto(1);
  SplitMix64 init(42);
  auto states = make_kcontact_config(n, 1, init);
  EpidemicCompleteMonitor monitor(states);
  SplitMix64 rng(43);
  const TrialResult r = run_trial(proto, gt, states, rng, monitor, 1u << 24);
  REQUIRE(r.converged);

  const auto frozen = states;
  NullMonitor null;
  const TrialResult ext = run_trial(proto, gt, states, rng, null, 20000);
  REQUIRE(ext.last_change_interaction == 0);  // parallel time cannot decrease: nothing moves
  REQUIRE(states == frozen);
}

TEST_CASE("transitions are anonymous: permuted traces match") {
  const std::size_t n = 6;
  SplitMix64 prng(31337);
  std::vector<Vec> pos;
  for (std::size_t i = 0; i < n; ++i) pos.push_back(Vec{prng.u01()});

  // permutation pi sending A-indices to B-indices
  std::vector<std::size_t> pi{3, 0, 5, 1, 4, 2};
  std::vector<Vec> pos_b(n, Vec(1));
  for (std::size_t i = 0; i < n; ++i) pos_b[pi[i]] = pos[i];

  GroundTruth gt_a(1, pos, 0);
  GroundTruth gt_b(1, pos_b, pi[0]);
  PositioningProtocol proto(1, 1e-9);
  auto a = make_positioning_config(n, 0);
  auto b = make_positioning_config(n, pi[0]);

  SplitMix64 sched(7);
  for (int step = 0; step < 4000; ++step) {
    const auto [x, y] = schedule_pair(sched, n);
    const bool ca = apply_interaction(proto, gt_a, a, x, y);
    const bool cb = apply_interaction(proto, gt_b, b, pi[x], pi[y]);
    REQUIRE(ca == cb);
    for (std::size_t i = 0; i < n; ++i) REQUIRE(a[i] == b[pi[i]]);
  }
}
