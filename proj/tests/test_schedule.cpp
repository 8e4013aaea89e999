#include <doctest.h>

#include <stdexcept>

#include "bfm/rng.hpp"
#include "bfm/schedule.hpp"

using namespace bfm;

TEST_CASE("uniform schedule boundaries") {
  auto s6 = make_uniform_schedule(6);
  REQUIRE(s6.M == 6);
  REQUIRE(s6.boundaries.size() == 7);
  for (int m = 0; m <= 6; ++m) CHECK(s6.boundaries[m] == static_cast<double>(m) / 6.0);
  CHECK(s6.boundaries[0] == 0.0);
  CHECK(s6.boundaries[6] == 1.0);

  auto s1 = make_uniform_schedule(1);
  CHECK(s1.boundaries == std::vector<double>{0.0, 1.0});

  auto s4 = make_uniform_schedule(4);
  CHECK(s4.boundaries == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});

  CHECK_THROWS_AS(make_uniform_schedule(0), std::invalid_argument);
}

TEST_CASE("segment_index locates half-open segments") {
  auto s6 = make_uniform_schedule(6);
  // enumerating the intervals: [3/6, 4/6) contains 0.5 at its left edge
  auto c = segment_index(0.5, s6);
  CHECK(c.m == 4);
  CHECK(c.a == doctest::Approx(0.0).epsilon(1e-12));

  auto c0 = segment_index(0.0, s6);
  CHECK(c0.m == 1);
  CHECK(c0.a == 0.0);

  auto s4 = make_uniform_schedule(4);
  auto c3 = segment_index(0.625, s4);
  CHECK(c3.m == 3);
  CHECK(c3.a == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(c3.b == c3.a);
  CHECK(c3.dt == doctest::Approx(0.25).epsilon(1e-15));

  CHECK_THROWS_AS(segment_index(-0.1, s4), std::out_of_range);
  CHECK_THROWS_AS(segment_index(1.0, s4), std::out_of_range);
  CHECK_THROWS_AS(segment_index(1.5, s4), std::out_of_range);
}

TEST_CASE("segment_index tiles [0,1) with no overlap") {
  Rng rng(7);
  for (int M : {1, 2, 3, 6, 13}) {
    auto s = make_uniform_schedule(M);
    for (int i = 0; i < 2000; ++i) {
      const double t = rng.uniform();
      auto c = segment_index(t, s);
      CHECK(c.m >= 1);
      CHECK(c.m <= M);
      CHECK(t >= s.lower(c.m));
      CHECK(t < s.upper(c.m));
      CHECK(c.a >= 0.0);
      CHECK(c.a < 1.0);
    }
    // boundary values land in the right-hand segment
    for (int m = 1; m <= M; ++m) CHECK(segment_index(s.lower(m), s).m == m);
  }
}

TEST_CASE("segment_endpoints on the linear path") {
  Vec x1{2.0, 0.0}, eps{0.0, 2.0};
  Vec lo, hi;
  segment_endpoints(x1, eps, 0.0, 0.5, lo, hi);
  CHECK(lo == eps);  // sigma(0) = 1, alpha(0) = 0
  CHECK(hi[0] == doctest::Approx(1.0));
  CHECK(hi[1] == doctest::Approx(1.0));

  segment_endpoints(x1, eps, 0.5, 1.0, lo, hi);
  CHECK(hi == x1);  // alpha(1) = 1, sigma(1) = 0

  Vec bad{1.0};
  CHECK_THROWS_AS(segment_endpoints(x1, bad, 0.0, 0.5, lo, hi), std::invalid_argument);
  CHECK_THROWS_AS(segment_endpoints(x1, eps, 0.5, 0.5, lo, hi), std::invalid_argument);
}

TEST_CASE("interpolate_within") {
  SegmentCoords c;
  c.m = 1;
  c.dt = 0.5;

  Vec lo{1.0, -3.0}, hi{2.0, 5.0};
  c.a = c.b = 0.0;
  CHECK(interpolate_within(lo, hi, c) == lo);  // bit-exact at the segment start

  c.a = c.b = 0.5;
  Vec mid = interpolate_within(Vec{0.0, 0.0}, Vec{4.0, -2.0}, c);
  CHECK(mid[0] == 2.0);
  CHECK(mid[1] == -1.0);

  c.a = c.b = 0.25;
  Vec q = interpolate_within(Vec{1.0}, Vec{5.0}, c);
  CHECK(q[0] == doctest::Approx(2.0).epsilon(1e-15));

  Vec bad{1.0};
  CHECK_THROWS_AS(interpolate_within(lo, bad, c), std::invalid_argument);
}

TEST_CASE("interpolate_within approaches x_hi as a -> 1") {
  SegmentCoords c;
  c.m = 1;
  c.dt = 1.0;
  c.a = c.b = 1.0 - 1e-13;
  Vec lo{0.3, -0.7}, hi{1.9, 2.2};
  Vec v = interpolate_within(lo, hi, c);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(v[i] - hi[i]) < 1e-12);
}

TEST_CASE("segment_velocity_target") {
  Vec lo{0.0, 0.0}, hi{1.0, 2.0};
  Vec v = segment_velocity_target(lo, hi, 1.0 / 6.0);
  CHECK(v[0] == doctest::Approx(6.0).epsilon(1e-14));
  CHECK(v[1] == doctest::Approx(12.0).epsilon(1e-14));

  Vec z = segment_velocity_target(hi, hi, 0.25);
  CHECK(z == Vec{0.0, 0.0});

  CHECK_THROWS_AS(segment_velocity_target(lo, hi, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(segment_velocity_target(lo, hi, -1.0), std::invalid_argument);
}

// Blockwise interpolation with one shared noise draw reproduces the global
// linear path, and the in-segment velocity is x1 - eps, over random triples.
TEST_CASE("global-path equivalence and velocity constancy") {
  Rng rng(42);
  auto s = make_uniform_schedule(6);
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 3;
    Vec x1 = rng.normal_vec(d), eps = rng.normal_vec(d);
    const double t = rng.uniform();
    auto c = segment_index(t, s);
    Vec lo, hi;
    segment_endpoints(x1, eps, s.lower(c.m), s.upper(c.m), lo, hi);
    Vec xt = interpolate_within(lo, hi, c);
    Vec vt = segment_velocity_target(lo, hi, c.dt);
    for (int i = 0; i < d; ++i) {
      const double global = t * x1[i] + (1.0 - t) * eps[i];
      CHECK(std::abs(xt[i] - global) < 1e-12);
      CHECK(std::abs(vt[i] - (x1[i] - eps[i])) < 1e-12);
    }
  }
}
