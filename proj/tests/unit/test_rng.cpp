#include <doctest.h>

#include <cmath>
#include <set>

#include "lov/black_scholes.hpp"
#include "lov/rng.hpp"

using namespace lov;

TEST_CASE("philox4x32-10 known-answer vectors") {
  // Reference vectors for the 10-round philox4x32 generator.
  {
    const auto out = rng::philox4x32(0, {0, 0, 0, 0});
    CHECK(out[0] == 0x6627e8d5u);
    CHECK(out[1] == 0xe169c58du);
    CHECK(out[2] == 0xbc57ac4cu);
    CHECK(out[3] == 0x9b00dbd8u);
  }
  {
    const auto out = rng::philox4x32(0xffffffffffffffffull,
                                     {0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu});
    CHECK(out[0] == 0x408f276du);
    CHECK(out[1] == 0x41c83b0eu);
    CHECK(out[2] == 0xa20bc7c6u);
    CHECK(out[3] == 0x6d5451fdu);
  }
  {
    // key words (a4093822, 299f31d0) packed low-word-first
    const auto out = rng::philox4x32(0x299f31d0a4093822ull,
                                     {0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u});
    CHECK(out[0] == 0xd16cfe09u);
    CHECK(out[1] == 0x94fdccebu);
    CHECK(out[2] == 0x5001e420u);
    CHECK(out[3] == 0x24126ea1u);
  }
}

TEST_CASE("uniform01 is deterministic, open-interval, and counter-separated") {
  const double u = rng::uniform01(7, 123, 45, 0);
  CHECK(u == rng::uniform01(7, 123, 45, 0));
  CHECK(u > 0.0);
  CHECK(u < 1.0);

  std::set<double> seen;
  for (std::uint32_t slot = 0; slot < 4; ++slot) {
    for (std::uint32_t step = 0; step < 4; ++step) {
      for (std::uint64_t path = 0; path < 4; ++path) {
        seen.insert(rng::uniform01(7, path, step, slot));
      }
    }
  }
  CHECK(seen.size() == 64);  // all coordinates decorrelate the stream
  CHECK(rng::uniform01(7, 0, 0) != rng::uniform01(8, 0, 0));
}

TEST_CASE("inverse normal CDF against the CDF and symmetry") {
  CHECK(rng::inverse_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(rng::inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  for (double p : {1e-10, 1e-4, 0.01, 0.2, 0.5, 0.77, 0.99, 1 - 1e-6}) {
    const double z = rng::inverse_normal_cdf(p);
    CHECK(norm_cdf(z) == doctest::Approx(p).epsilon(1e-9));
    // symmetry where 1-p keeps full precision of p
    if (p >= 1e-4 && p <= 1.0 - 1e-4) {
      CHECK(rng::inverse_normal_cdf(1.0 - p) == doctest::Approx(-z).epsilon(1e-9));
    }
  }
  CHECK_THROWS(rng::inverse_normal_cdf(0.0));
  CHECK_THROWS(rng::inverse_normal_cdf(1.0));
}

TEST_CASE("normal draws have standard moments") {
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng::normal(42, static_cast<std::uint64_t>(i), 0);
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::fabs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}
