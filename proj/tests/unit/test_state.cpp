#include <doctest.h>

#include <cmath>
#include <random>

#include "swarmlaw/errors.hpp"
#include "swarmlaw/state.hpp"

using namespace swarmlaw;

TEST_CASE("minimum image wraps into the half-open interval") {
  const auto box = DomainSpec::periodic(10.0);
  CHECK(minimum_image({6, 0}, box) == Vec2{-4, 0});
  CHECK(minimum_image({0, 0}, box) == Vec2{0, 0});
  const auto w = minimum_image({-5.5, 5.5}, box);
  CHECK(w.x == doctest::Approx(4.5));
  CHECK(w.y == doctest::Approx(-4.5));
  // +L/2 stays, -L/2 maps to +L/2.
  CHECK(minimum_image({5, -5}, box) == Vec2{5, 5});
  CHECK(minimum_image({6, 0}, DomainSpec::unbounded()) == Vec2{6, 0});
}

TEST_CASE("minimum image agrees with a scalar modulo oracle") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-40.0, 40.0);
  const double L = 7.3;
  const auto box = DomainSpec::periodic(L);
  for (int k = 0; k < 1000; ++k) {
    const double d = u(rng);
    double m = std::fmod(d, L);
    if (m <= -L / 2) m += L;
    if (m > L / 2) m -= L;
    CHECK(minimum_image({d, 0}, box).x == doctest::Approx(m).epsilon(1e-12));
  }
}

TEST_CASE("wrap_position keeps points inside the box") {
  const auto box = DomainSpec::periodic(3.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int k = 0; k < 1000; ++k) {
    const auto p = wrap_position({u(rng), u(rng)}, box);
    CHECK(p.x >= -1.5);
    CHECK(p.x < 1.5);
    CHECK(p.y >= -1.5);
    CHECK(p.y < 1.5);
  }
}

TEST_CASE("periodic domain needs a positive side") {
  CHECK_THROWS_AS(DomainSpec::periodic(0.0).validate(), ConfigError);
  CHECK_NOTHROW(DomainSpec::periodic(1.0).validate());
}
