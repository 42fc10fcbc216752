#include <cmath>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "poploc/engine.hpp"
#include "poploc/epidemics.hpp"
#include "poploc/experiment.hpp"
#include "poploc/scaling.hpp"

using namespace poploc;

namespace {

std::vector<Vec> line_positions(std::size_t n) {
  std::vector<Vec> p;
  for (std::size_t i = 0; i < n; ++i) p.push_back(Vec{static_cast<double>(i)});
  return p;
}

EpidemicState green(std::uint32_t token) {
  EpidemicState s;
  s.token = token;
  s.colour = Colour::kGreen;
  return s;
}

EpidemicState blue(std::uint32_t token, std::initializer_list<std::uint32_t> contacts = {}) {
  EpidemicState s;
  s.token = token;
  for (std::uint32_t t : contacts) s.contacts.push_back(t);
  return s;
}

}  // namespace

TEST_CASE("one-contact conversion on first green meeting") {
  KContactProtocol proto(1);
  EpidemicState u = blue(0);
  EpidemicState v = green(1);
  REQUIRE(proto.step(u, v, 0.0));
  REQUIRE(u.colour == Colour::kGreen);
  REQUIRE(u.contacts.size() == 0);
  REQUIRE(v == green(1));
}

TEST_CASE("repeat contacts do not count towards the threshold") {
  KContactProtocol proto(2);
  EpidemicState u = blue(0, {1});
  EpidemicState v = green(1);
  REQUIRE_FALSE(proto.step(u, v, 0.0));
  REQUIRE(u == blue(0, {1}));
}

TEST_CASE("a second distinct contact converts at threshold two") {
  KContactProtocol proto(2);
  EpidemicState u = blue(0, {1});
  EpidemicState v = green(2);
  REQUIRE(proto.step(u, v, 0.0));
  REQUIRE(u.colour == Colour::kGreen);
  REQUIRE(u.contacts.size() == 0);
}

TEST_CASE("epidemic_complete") {
  std::vector<EpidemicState> config{green(0), green(1)};
  REQUIRE(epidemic_complete(config));
  config.push_back(blue(2));
  REQUIRE_FALSE(epidemic_complete(config));
}

TEST_CASE("a population of exactly k greens is complete immediately") {
  SplitMix64 rng(1);
  auto config = make_kcontact_config(3, 3, rng);
  REQUIRE(epidemic_complete(config));
}

TEST_CASE("colour transitions are monotone along a trace") {
  const std::size_t n = 256;
  GroundTruth gt(1, line_positions(n));
  KContactProtocol proto(2);
  SplitMix64 init(9);
  auto states = make_kcontact_config(n, 2, init);
  SplitMix64 sched(10);

  std::vector<Colour> colour(n);
  std::vector<std::size_t> contacts(n);
  for (std::size_t i = 0; i < n; ++i) {
    colour[i] = states[i].colour;
    contacts[i] = states[i].contacts.size();
  }
  bool complete = false;
  for (int t = 0; t < 2000000 && !complete; ++t) {
    const auto [a, b] = schedule_pair(sched, n);
    apply_interaction(proto, gt, states, a, b);
    for (std::size_t i : {static_cast<std::size_t>(a), static_cast<std::size_t>(b)}) {
      if (colour[i] == Colour::kGreen) {
        REQUIRE(states[i].colour == Colour::kGreen);
      }
      if (states[i].colour == colour[i] && colour[i] == Colour::kBlue) {
        REQUIRE(states[i].contacts.size() >= contacts[i]);
      }
      colour[i] = states[i].colour;
      contacts[i] = states[i].contacts.size();
    }
    complete = epidemic_complete(states);
  }
  REQUIRE(complete);
}

TEST_CASE("fewer than k initial greens never complete") {
  const std::size_t n = 256;
  GroundTruth gt(1, line_positions(n));
  for (std::size_t k : {2u, 3u}) {
    KContactProtocol proto(k);
    SplitMix64 init(20 + k);
    auto states = make_kcontact_config(n, k - 1, init);
    EpidemicCompleteMonitor monitor(states);
    SplitMix64 sched(30 + k);
    const double bound = theoretical_parallel_bound(ProtocolKind::kKContact, n, 1, k);
    const auto budget =
        static_cast<std::uint64_t>(10.0 * 64.0 * bound * static_cast<double>(n));
    const TrialResult r = run_trial(proto, gt, states, sched, monitor, budget);
    REQUIRE_FALSE(r.converged);
    REQUIRE_FALSE(epidemic_complete(states));
  }
}

TEST_CASE("completion time scales roughly as the two-contact law") {
  // Smoke-scale check; the acceptance suite runs the strict version.
  ExperimentConfig cfg;
  cfg.protocol = ProtocolKind::kKContact;
  cfg.k_contact = 2;
  cfg.n_grid = {256, 512, 1024, 2048};
  cfg.trials = 10;
  cfg.base_seed = 11;
  const auto rows = run_experiment(cfg);
  REQUIRE(rows.size() == 40);
  for (const auto& r : rows) REQUIRE(r.converged);
  const ScalingReport rep = fit_scaling(rows, FitModel::kPowerLaw, 0.5, 0.5, 0.2);
  REQUIRE(rep.pass);
}
