#include <doctest.h>

#include <cmath>
#include <random>

#include "lov/black_scholes.hpp"

using namespace lov;

TEST_CASE("bs_price closed-form values") {
  // ATM with zero carry: put = call = spot * erf(sigma sqrt(T)/(2 sqrt2)) * ... the
  // exact identity is price = spot (2 Phi(sigma sqrt(T)/2) - 1).
  const double oracle = 100.0 * std::erf(0.1 / std::sqrt(2.0));
  CHECK(bs_price(100, 100, 1, 0.2, 0, 0, -1) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(bs_price(100, 100, 1, 0.2, 0, 0, -1) == doctest::Approx(7.9656).epsilon(1e-4));
  CHECK(bs_price(100, 100, 1, 0.2, 0, 0, +1) ==
        doctest::Approx(bs_price(100, 100, 1, 0.2, 0, 0, -1)).epsilon(1e-15));
  // T = 0: intrinsic
  CHECK(bs_price(100, 80, 0, 0.3, 0.05, 0, -1) == 0.0);
  CHECK(bs_price(100, 80, 0, 0.3, 0.05, 0, +1) == doctest::Approx(20.0));
  // sigma = 0: discounted intrinsic of the forward
  CHECK(bs_price(100, 90, 1, 0.0, 0.05, 0, +1) ==
        doctest::Approx(100.0 - 90.0 * std::exp(-0.05)).epsilon(1e-12));
}

TEST_CASE("put-call parity to 1e-12 over random draws") {
  std::mt19937_64 gen(1234);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double spot = 50.0 + 200.0 * u(gen);
    const double strike = 50.0 + 200.0 * u(gen);
    const double T = 0.01 + 2.0 * u(gen);
    const double sigma = 0.05 + 0.8 * u(gen);
    const double r = -0.02 + 0.12 * u(gen);
    const double q = 0.08 * u(gen);
    const double call = bs_price(spot, strike, T, sigma, r, q, +1);
    const double put = bs_price(spot, strike, T, sigma, r, q, -1);
    const double parity = spot * std::exp(-q * T) - strike * std::exp(-r * T);
    CHECK(std::fabs(call - put - parity) < 1e-12 * std::max(1.0, spot));
  }
}

TEST_CASE("vega closed form and finite differences") {
  const double oracle = 100.0 * std::exp(-0.5 * 0.1 * 0.1) / std::sqrt(2.0 * M_PI);
  CHECK(bs_vega(100, 100, 1, 0.2, 0, 0) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(bs_vega(100, 100, 1, 0.2, 0, 0) == doctest::Approx(39.695).epsilon(1e-4));
  CHECK(bs_vega(100, 1e7, 1, 0.2, 0, 0) < 1e-10);  // far wing

  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double h = 1e-5;
  for (int i = 0; i < 200; ++i) {
    const double spot = 80.0 + 40.0 * u(gen);
    const double strike = 80.0 + 40.0 * u(gen);
    const double T = 0.1 + 1.9 * u(gen);
    const double sigma = 0.1 + 0.5 * u(gen);
    const double fd = (bs_price(spot, strike, T, sigma + h, 0.02, 0.01, +1) -
                       bs_price(spot, strike, T, sigma - h, 0.02, 0.01, +1)) /
                      (2 * h);
    const double v = bs_vega(spot, strike, T, sigma, 0.02, 0.01);
    CHECK(v > 0.0);
    CHECK(std::fabs(fd - v) / v < 1e-6);
  }
}

TEST_CASE("implied_vol inverts bs_price within 1e-8 on sigma in [0.01, 2]") {
  // near-the-money, where the inversion is well conditioned down to sigma=0.01
  for (double sigma = 0.01; sigma <= 2.0; sigma += 0.0995) {
    for (int flag : {+1, -1}) {
      const double p = bs_price(100, 100, 0.5, sigma, 0.03, 0.01, flag);
      const auto r = implied_vol(p, 100, 100, 0.5, 0.03, 0.01, flag);
      CHECK(!r.at_intrinsic);
      CHECK(std::fabs(r.sigma - sigma) < 1e-8);
    }
  }
  CHECK(implied_vol(7.9656, 100, 100, 1, 0, 0, -1).sigma ==
        doctest::Approx(0.2).epsilon(1e-4));
}

TEST_CASE("implied_vol boundary handling") {
  // price exactly at the intrinsic lower bound -> sigma 0 with flag
  const double intrinsic = 100.0 - 90.0 * std::exp(-0.05);
  const auto r = implied_vol(intrinsic, 100, 90, 1, 0.05, 0, +1);
  CHECK(r.at_intrinsic);
  CHECK(r.sigma == 0.0);
  // call above spot violates no-arbitrage
  CHECK_THROWS_AS(implied_vol(101.0, 100, 90, 1, 0.05, 0, +1), ArbitrageViolation);
  CHECK_THROWS_AS(implied_vol(-0.5, 100, 90, 1, 0.05, 0, +1), ArbitrageViolation);
}
