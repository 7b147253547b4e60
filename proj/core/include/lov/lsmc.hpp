#pragma once

#include <vector>

#include <Eigen/Dense>

#include "lov/simulate.hpp"

namespace lov {

/// Laguerre polynomial L_k(y), k <= 3.
double laguerre(int k, double y);

/// Continuation-value regressors at one (path, date):
/// [1, p_BS(t,X_t,sigma_t;K,T), L_1(X/x0), L_2(X/x0), L_3(X/x0),
///  sigma_t sqrt(T-t), O_t(A_1..A_5), X_t O_t(A_1..A_5)].
inline constexpr int kFeatureDim = 16;

struct ExercisePolicy {
  /// Per exercise date (excluding maturity): regression coefficients, or an
  /// empty vector when the regression was dropped (too few ITM paths).
  std::vector<Eigen::VectorXd> coefficients;
  std::vector<int> dates;  ///< step indices, ascending, maturity last
};

struct LsmcOptions {
  bool itm_only = true;   ///< regress on in-the-money paths only
  bool two_pass = false;  ///< fit the policy on even paths, price on odd paths
};

struct AmericanPricing {
  double price = 0.0;
  double std_error = 0.0;
  ExercisePolicy policy;
  std::vector<int> stop_step;  ///< per path; -1 when the payoff is zero
  bool in_sample = true;       ///< same paths used for regression and pricing (low bias flag)
};

/// Longstaff-Schwartz backward induction for an American put on a simulated
/// ensemble. `exercise_steps` are ascending step indices in [1, N]; the step
/// matching T must be included. Requires band occupations recorded on the
/// ensemble. Lower-biased in-sample estimator by default.
AmericanPricing price_american_put(const PathEnsemble& ensemble, double strike,
                                   double expiry, double rate,
                                   const std::vector<int>& exercise_steps,
                                   const LsmcOptions& options = {});

/// Call-payoff variant (mainly for the Merton no-dividend check: with q = 0
/// the American call must price like the European one).
AmericanPricing price_american_call(const PathEnsemble& ensemble, double strike,
                                    double expiry, double rate,
                                    const std::vector<int>& exercise_steps,
                                    const LsmcOptions& options = {});

struct EuropeanPricing {
  double price = 0.0;
  double std_error = 0.0;  ///< antithetic-pair variance estimator
};

EuropeanPricing price_european(const PathEnsemble& ensemble, double strike,
                               double expiry, double rate, int payoff_flag);

/// Cox-Ross-Rubinstein binomial lattice with continuous compounding.
double binomial_price(double spot, double strike, double expiry, double sigma,
                      double rate, double div_yield, int payoff_flag,
                      Exercise exercise, int steps);

/// Daily exercise schedule: every step from 1 to the step of `expiry`.
std::vector<int> all_steps_to(const PathEnsemble& ensemble, double expiry);

}  // namespace lov
