#include <array>
#include <cmath>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "poploc/geometry.hpp"
#include "poploc/rng.hpp"

using namespace poploc;

namespace {

constexpr double kTol = 1e-9;

// Forward-generates a multilateration instance from a known source point;
// redraws the anchors if the configuration happens to be ill-conditioned.
struct Instance {
  std::vector<Anchor> anchors;
  Vec source;
};

Instance random_instance(std::size_t k, SplitMix64& rng) {
  while (true) {
    Vec source(k);
    for (std::size_t j = 0; j < k; ++j) source[j] = rng.u01();
    std::vector<Anchor> anchors;
    for (std::size_t a = 0; a < k + 1; ++a) {
      Vec p(k);
      for (std::size_t j = 0; j < k; ++j) p[j] = rng.u01();
      anchors.push_back(Anchor{p, distance(p, source)});
    }
    try {
      multilaterate(anchors, k, kTol);
      return Instance{std::move(anchors), source};
    } catch (const DegenerateGeometryError&) {
      // near-collinear draw, try again
    }
  }
}

}  // namespace

TEST_CASE("distance basics") {
  REQUIRE(distance(Vec{0.0, 0.0}, Vec{0.0, 0.0}) == 0.0);
  REQUIRE(distance(Vec{0.0, 0.0}, Vec{3.0, 4.0}) == 5.0);
  REQUIRE_THROWS_AS(distance(Vec{0.0}, Vec{0.0, 1.0}), std::invalid_argument);

  SplitMix64 rng(11);
  for (int i = 0; i < 200; ++i) {
    Vec p{rng.u01(), rng.u01(), rng.u01()};
    Vec q{rng.u01(), rng.u01(), rng.u01()};
    REQUIRE(distance(p, q) == distance(q, p));
  }
}

TEST_CASE("multilaterate recovers the stated examples") {
  const std::array<Anchor, 3> a2{
      Anchor{Vec{0.0, 0.0}, std::sqrt(2.0)},
      Anchor{Vec{1.0, 0.0}, 1.0},
      Anchor{Vec{0.0, 1.0}, 1.0},
  };
  const Vec x2 = multilaterate({a2.data(), a2.size()}, 2, kTol);
  REQUIRE_THAT(x2[0], Catch::Matchers::WithinAbs(1.0, 1e-12));
  REQUIRE_THAT(x2[1], Catch::Matchers::WithinAbs(1.0, 1e-12));

  const std::array<Anchor, 2> a1{Anchor{Vec{0.0}, 5.0}, Anchor{Vec{8.0}, 3.0}};
  const Vec x1 = multilaterate({a1.data(), a1.size()}, 1, kTol);
  REQUIRE_THAT(x1[0], Catch::Matchers::WithinAbs(5.0, 1e-12));
}

TEST_CASE("collinear anchors are degenerate") {
  const std::array<Anchor, 3> a{
      Anchor{Vec{0.0, 0.0}, 1.0},
      Anchor{Vec{1.0, 0.0}, 1.0},
      Anchor{Vec{2.0, 0.0}, 1.0},
  };
  REQUIRE_THROWS_AS(multilaterate({a.data(), a.size()}, 2, kTol), DegenerateGeometryError);
}

TEST_CASE("inconsistent distances are rejected") {
  const std::array<Anchor, 3> a{
      Anchor{Vec{0.0, 0.0}, std::sqrt(2.0)},
      Anchor{Vec{1.0, 0.0}, 1.0},
      Anchor{Vec{0.0, 1.0}, 2.5},
  };
  REQUIRE_THROWS_AS(multilaterate({a.data(), a.size()}, 2, kTol), InconsistentAnchorsError);
}

TEST_CASE("multilaterate round-trips random instances") {
  SplitMix64 rng(202);
  for (std::size_t k = 1; k <= 3; ++k) {
    for (int rep = 0; rep < 1000; ++rep) {
      const Instance inst = random_instance(k, rng);
      const Vec x = multilaterate(inst.anchors, k, kTol);
      REQUIRE_THAT(distance(x, inst.source), Catch::Matchers::WithinAbs(0.0, 1e-8));
    }
  }
}

TEST_CASE("position_in_subspace places the first green on a fresh axis") {
  const std::array<Anchor, 1> a{Anchor{Vec{0.0, 0.0, 0.0}, 7.0}};
  const Vec x = position_in_subspace({a.data(), a.size()}, 0, 3, kTol);
  REQUIRE(x == Vec{7.0, 0.0, 0.0});
}

TEST_CASE("position_in_subspace projects and lifts") {
  // Forward-computed from the point (2,1): distance to the origin is
  // sqrt(5), distance to (3,0) is sqrt(2).
  const std::array<Anchor, 2> a{
      Anchor{Vec{0.0, 0.0}, std::sqrt(5.0)},
      Anchor{Vec{3.0, 0.0}, std::sqrt(2.0)},
  };
  const Vec x = position_in_subspace({a.data(), a.size()}, 1, 2, kTol);
  REQUIRE_THAT(x[0], Catch::Matchers::WithinAbs(2.0, 1e-12));
  REQUIRE_THAT(x[1], Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("position_in_subspace rejects an impossible triangle") {
  const std::array<Anchor, 2> a{
      Anchor{Vec{0.0, 0.0}, 1.0},
      Anchor{Vec{3.0, 0.0}, 1.0},  // projection lands at 1.5 > 1
  };
  REQUIRE_THROWS_AS(position_in_subspace({a.data(), a.size()}, 1, 2, kTol),
                    InconsistentAnchorsError);
}

TEST_CASE("position_in_subspace round-trips random instances") {
  SplitMix64 rng(203);
  for (std::size_t k = 2; k <= 3; ++k) {
    for (int rep = 0; rep < 1000; ++rep) {
      // Build an i-dimensional frame from points already embedded in the
      // first i coordinates, then place a source with a nonnegative
      // (i+1)-th coordinate.
      const std::size_t i = 1 + rng.bounded(k - 1);
      std::vector<Anchor> anchors;
      Vec source(k);
      for (std::size_t j = 0; j < i; ++j) source[j] = 2.0 * rng.u01() - 1.0;
      source[i] = rng.u01() + 0.1;
      anchors.push_back(Anchor{Vec::zero(k), source.norm()});
      bool degenerate = false;
      for (std::size_t g = 1; g <= i; ++g) {
        Vec p(k);
        for (std::size_t j = 0; j < g; ++j) p[j] = 2.0 * rng.u01() - 1.0;
        if (std::abs(p[g - 1]) < 0.05) degenerate = true;  // keep the frame well-spread
        anchors.push_back(Anchor{p, distance(p, source)});
      }
      if (degenerate) continue;
      try {
        const Vec x = position_in_subspace(anchors, i, k, kTol);
        REQUIRE_THAT(distance(x, source), Catch::Matchers::WithinAbs(0.0, 1e-8));
      } catch (const DegenerateGeometryError&) {
        // acceptable for an unlucky frame; the acceptance suite tracks rates
      }
    }
  }
}

TEST_CASE("consistent matches its examples and is symmetric") {
  REQUIRE(consistent(Vec{0.0, 0.0}, Vec{3.0, 4.0}, 5.0, kTol));
  REQUIRE_FALSE(consistent(Vec{0.0, 0.0}, Vec{3.0, 4.0}, 5.1, kTol));
  const Vec p{2.5, -1.0};
  REQUIRE(consistent(p, p, 0.0, kTol));

  SplitMix64 rng(77);
  for (int i = 0; i < 200; ++i) {
    Vec a{rng.u01(), rng.u01()};
    Vec b{rng.u01(), rng.u01()};
    const double d = rng.u01() * 2.0;
    REQUIRE(consistent(a, b, d, kTol) == consistent(b, a, d, kTol));
  }
}

TEST_CASE("incremental placement reproduces an isometric image") {
  SplitMix64 rng(404);
  for (std::size_t k = 1; k <= 3; ++k) {
    for (int rep = 0; rep < 50; ++rep) {
      // True points: leader plus k greens plus one extra agent.
      std::vector<Vec> truth;
      for (std::size_t i = 0; i < k + 2; ++i) {
        Vec p(k);
        for (std::size_t j = 0; j < k; ++j) p[j] = rng.u01();
        truth.push_back(p);
      }
      auto true_d = [&](std::size_t a, std::size_t b) { return distance(truth[a], truth[b]); };

      // Labels, built the way the part-1 protocol would.
      std::vector<Vec> labels{Vec::zero(k)};
      std::vector<Anchor> registry;
      bool failed = false;
      for (std::size_t g = 1; g <= k; ++g) {
        std::vector<Anchor> anchors;
        anchors.push_back(Anchor{Vec::zero(k), true_d(0, g)});
        for (std::size_t j = 1; j < g; ++j) anchors.push_back(Anchor{labels[j], true_d(j, g)});
        try {
          labels.push_back(position_in_subspace(anchors, g - 1, k, kTol));
        } catch (const GeometryError&) {
          failed = true;
          break;
        }
      }
      if (failed) continue;

      std::vector<Anchor> anchors;
      for (std::size_t j = 0; j <= k; ++j) anchors.push_back(Anchor{labels[j], true_d(j, k + 1)});
      try {
        labels.push_back(multilaterate(anchors, k, kTol));
      } catch (const GeometryError&) {
        continue;
      }

      for (std::size_t a = 0; a < labels.size(); ++a) {
        for (std::size_t b = a + 1; b < labels.size(); ++b) {
          const double want = true_d(a, b);
          const double got = distance(labels[a], labels[b]);
          REQUIRE_THAT(got, Catch::Matchers::WithinRel(want, 1e-6));
        }
      }
    }
  }
}
