#include "lov/black_scholes.hpp"

#include <algorithm>
#include <cmath>

namespace lov {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double norm_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double bs_price(double spot, double strike, double expiry, double sigma,
                double rate, double div_yield, int payoff_flag) {
  if (spot <= 0.0 || strike <= 0.0) {
    throw std::invalid_argument("bs_price: spot and strike must be positive");
  }
  if (expiry < 0.0 || sigma < 0.0) {
    throw std::invalid_argument("bs_price: expiry and sigma must be nonnegative");
  }
  const double eta = payoff_flag;
  const double stdev = sigma * std::sqrt(expiry);
  const double df_r = std::exp(-rate * expiry);
  const double df_q = std::exp(-div_yield * expiry);
  if (expiry == 0.0) {
    return std::max(eta * (spot - strike), 0.0);
  }
  if (stdev == 0.0) {
    return std::max(eta * (spot * df_q - strike * df_r), 0.0);
  }
  const double d1 =
      (std::log(spot / strike) + (rate - div_yield + 0.5 * sigma * sigma) * expiry) /
      stdev;
  const double d2 = d1 - stdev;
  return eta * (spot * df_q * norm_cdf(eta * d1) - strike * df_r * norm_cdf(eta * d2));
}

double bs_vega(double spot, double strike, double expiry, double sigma,
               double rate, double div_yield) {
  if (expiry <= 0.0) {
    throw std::invalid_argument("bs_vega: expiry must be positive");
  }
  const double stdev = sigma * std::sqrt(expiry);
  if (stdev == 0.0) return 0.0;
  const double d1 =
      (std::log(spot / strike) + (rate - div_yield + 0.5 * sigma * sigma) * expiry) /
      stdev;
  return spot * std::exp(-div_yield * expiry) * norm_pdf(d1) * std::sqrt(expiry);
}

ImpliedVolResult implied_vol(double price, double spot, double strike,
                             double expiry, double rate, double div_yield,
                             int payoff_flag) {
  const double eta = payoff_flag;
  const double df_r = std::exp(-rate * expiry);
  const double df_q = std::exp(-div_yield * expiry);
  const double lower = std::max(eta * (spot * df_q - strike * df_r), 0.0);
  const double upper = (payoff_flag > 0) ? spot * df_q : strike * df_r;
  const double tol = 1e-10;
  if (price < lower - tol || price > upper + tol) {
    throw ArbitrageViolation("implied_vol: price outside no-arbitrage bounds");
  }
  if (price <= lower + tol) {
    return {0.0, true};
  }

  auto f = [&](double sigma) {
    return bs_price(spot, strike, expiry, sigma, rate, div_yield, payoff_flag) - price;
  };

  // Bracket: price is increasing in sigma.
  double lo = 1e-9, hi = 1.0;
  while (f(hi) < 0.0 && hi < 64.0) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < 0.0) lo = mid; else hi = mid;
    if (hi - lo < 1e-8) break;
  }
  double sigma = 0.5 * (lo + hi);
  for (int i = 0; i < 50; ++i) {
    const double err = f(sigma);
    if (std::fabs(err) < tol) break;
    const double vega = bs_vega(spot, strike, expiry, sigma, rate, div_yield);
    if (vega <= 0.0) break;
    double next = sigma - err / vega;
    if (next <= lo || next >= hi) next = 0.5 * (lo + hi);  // keep the bracket
    if (err > 0.0) hi = sigma; else lo = sigma;
    sigma = next;
  }
  return {sigma, false};
}

}  // namespace lov
