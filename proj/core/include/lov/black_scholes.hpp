#pragma once

#include <stdexcept>

namespace lov {

/// Standard normal CDF.
double norm_cdf(double x);
/// Standard normal density.
double norm_pdf(double x);

/// European Black-Scholes price. `payoff_flag` is +1 for calls, -1 for puts.
/// At T=0 (or sigma=0) the price degenerates to the discounted intrinsic
/// value of the forward.
double bs_price(double spot, double strike, double expiry, double sigma,
                double rate, double div_yield, int payoff_flag);

/// Black-Scholes Vega, d(price)/d(sigma). Symmetric in the payoff flag.
double bs_vega(double spot, double strike, double expiry, double sigma,
               double rate, double div_yield);

/// Thrown when a target price violates no-arbitrage bounds.
struct ArbitrageViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ImpliedVolResult {
  double sigma = 0.0;
  bool at_intrinsic = false;  ///< price equals the lower bound; sigma pinned at 0
};

/// Inverts bs_price for sigma. Bisection bracket followed by a Newton polish;
/// converges to 1e-10 absolute on price. Prices at the intrinsic lower bound
/// return sigma=0 with the at_intrinsic flag set; prices outside the
/// no-arbitrage band throw ArbitrageViolation.
ImpliedVolResult implied_vol(double price, double spot, double strike,
                             double expiry, double rate, double div_yield,
                             int payoff_flag);

}  // namespace lov
