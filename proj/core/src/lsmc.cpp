#include "lov/lsmc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lov/black_scholes.hpp"

namespace lov {

double laguerre(int k, double y) {
  switch (k) {
    case 0: return 1.0;
    case 1: return 1.0 - y;
    case 2: return 1.0 - 2.0 * y + 0.5 * y * y;
    case 3: return 1.0 - 3.0 * y + 1.5 * y * y - y * y * y / 6.0;
    default: throw std::invalid_argument("laguerre: degree must be <= 3");
  }
}

namespace {

int step_of(const PathEnsemble& ens, double expiry) {
  const int n = static_cast<int>(std::lround(expiry / ens.dt));
  if (n < 1 || n > ens.N || std::fabs(n * ens.dt - expiry) > 1e-9 * std::max(1.0, expiry)) {
    throw std::invalid_argument("expiry does not sit on the simulation grid");
  }
  return n;
}

void fill_features(const PathEnsemble& ens, int j, int n, double strike,
                   double expiry, double rate, int eta, double* f) {
  const double t = n * ens.dt;
  const double x = ens.X(j, n);
  const double sig = ens.sigma(j, n);
  const double y = x / ens.x0;
  const double* bands = ens.band_occ.data() + (static_cast<std::size_t>(n - 1) * ens.J + j) * 5;
  f[0] = 1.0;
  f[1] = bs_price(x, strike, expiry - t, sig, rate, ens.div_yield, eta);
  f[2] = laguerre(1, y);
  f[3] = laguerre(2, y);
  f[4] = laguerre(3, y);
  f[5] = sig * std::sqrt(expiry - t);
  for (int b = 0; b < 5; ++b) {
    f[6 + b] = bands[b];
    f[11 + b] = x * bands[b];
  }
}

AmericanPricing price_american(const PathEnsemble& ens, double strike,
                               double expiry, double rate,
                               const std::vector<int>& exercise_steps,
                               const LsmcOptions& options, int eta) {
  if (!(strike > 0.0)) throw std::invalid_argument("price_american: strike must be positive");
  if (exercise_steps.empty()) throw std::invalid_argument("price_american: no exercise dates");
  const int nT = step_of(ens, expiry);
  if (exercise_steps.back() != nT) {
    throw std::invalid_argument("price_american: exercise dates must end at expiry");
  }
  if (ens.band_occ.empty()) {
    throw std::invalid_argument("price_american: ensemble lacks band occupations (record_bands)");
  }
  const int J = ens.J;

  AmericanPricing out;
  out.stop_step.assign(static_cast<std::size_t>(J), -1);
  out.in_sample = !options.two_pass;
  out.policy.dates = exercise_steps;

  // cash[j]: undiscounted payoff at the current stopping time
  std::vector<double> cash(static_cast<std::size_t>(J), 0.0);
  for (int j = 0; j < J; ++j) {
    const double intrinsic = eta * (ens.X(j, nT) - strike);
    if (intrinsic > 0.0) {
      cash[static_cast<std::size_t>(j)] = intrinsic;
      out.stop_step[static_cast<std::size_t>(j)] = nT;
    }
  }

  std::vector<Eigen::VectorXd> coeffs(exercise_steps.size() - 1);
  auto in_fit_set = [&](int j) { return !options.two_pass || (j % 2 == 0); };

  double feat[kFeatureDim];
  for (int d = static_cast<int>(exercise_steps.size()) - 2; d >= 0; --d) {
    const int n = exercise_steps[static_cast<std::size_t>(d)];
    const double t = n * ens.dt;

    std::vector<int> itm;
    itm.reserve(static_cast<std::size_t>(J));
    for (int j = 0; j < J; ++j) {
      if (eta * (ens.X(j, n) - strike) > 0.0) itm.push_back(j);
    }
    std::vector<int> fit;
    for (int j : itm) {
      if (in_fit_set(j)) fit.push_back(j);
    }
    if (static_cast<int>(fit.size()) < kFeatureDim) {
      continue;  // drop the regression at this date: continue everywhere
    }

    Eigen::MatrixXd A(static_cast<Eigen::Index>(fit.size()), kFeatureDim);
    Eigen::VectorXd b(static_cast<Eigen::Index>(fit.size()));
    for (std::size_t r = 0; r < fit.size(); ++r) {
      const int j = fit[r];
      fill_features(ens, j, n, strike, expiry, rate, eta, feat);
      for (int c = 0; c < kFeatureDim; ++c) A(static_cast<Eigen::Index>(r), c) = feat[c];
      const int stop = out.stop_step[static_cast<std::size_t>(j)];
      b[static_cast<Eigen::Index>(r)] =
          (stop < 0) ? 0.0
                     : cash[static_cast<std::size_t>(j)] * std::exp(-rate * (stop * ens.dt - t));
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    cod.setThreshold(1e-10);
    const Eigen::VectorXd beta = cod.solve(b);
    coeffs[static_cast<std::size_t>(d)] = beta;

    for (int j : itm) {
      const double intrinsic = eta * (ens.X(j, n) - strike);
      fill_features(ens, j, n, strike, expiry, rate, eta, feat);
      double continuation = 0.0;
      for (int c = 0; c < kFeatureDim; ++c) continuation += beta[c] * feat[c];
      if (intrinsic >= continuation) {  // ties exercise
        cash[static_cast<std::size_t>(j)] = intrinsic;
        out.stop_step[static_cast<std::size_t>(j)] = n;
      }
    }
  }
  out.policy.coefficients = std::move(coeffs);

  std::vector<double> value(static_cast<std::size_t>(J), 0.0);
  for (int j = 0; j < J; ++j) {
    const int stop = out.stop_step[static_cast<std::size_t>(j)];
    if (stop >= 0) {
      value[static_cast<std::size_t>(j)] =
          cash[static_cast<std::size_t>(j)] * std::exp(-rate * stop * ens.dt);
    }
  }

  if (options.two_pass) {
    double sum = 0.0, sumsq = 0.0;
    int count = 0;
    for (int j = 0; j < J; ++j) {
      if (j % 2 == 0) continue;  // priced on the held-out half
      sum += value[static_cast<std::size_t>(j)];
      sumsq += value[static_cast<std::size_t>(j)] * value[static_cast<std::size_t>(j)];
      ++count;
    }
    out.price = sum / count;
    const double var = std::max(0.0, sumsq / count - out.price * out.price);
    out.std_error = std::sqrt(var / count);
  } else {
    // antithetic-pair variance estimator
    const int H = J / 2;
    double sum = 0.0, sumsq = 0.0;
    for (int j = 0; j < H; ++j) {
      const double pair =
          0.5 * (value[static_cast<std::size_t>(j)] + value[static_cast<std::size_t>(j + H)]);
      sum += pair;
      sumsq += pair * pair;
    }
    out.price = sum / H;
    const double var = std::max(0.0, sumsq / H - out.price * out.price);
    out.std_error = std::sqrt(var / H);
  }
  return out;
}

}  // namespace

std::vector<int> all_steps_to(const PathEnsemble& ensemble, double expiry) {
  const int nT = step_of(ensemble, expiry);
  std::vector<int> steps(static_cast<std::size_t>(nT));
  for (int n = 1; n <= nT; ++n) steps[static_cast<std::size_t>(n - 1)] = n;
  return steps;
}

AmericanPricing price_american_put(const PathEnsemble& ensemble, double strike,
                                   double expiry, double rate,
                                   const std::vector<int>& exercise_steps,
                                   const LsmcOptions& options) {
  return price_american(ensemble, strike, expiry, rate, exercise_steps, options, -1);
}

AmericanPricing price_american_call(const PathEnsemble& ensemble, double strike,
                                    double expiry, double rate,
                                    const std::vector<int>& exercise_steps,
                                    const LsmcOptions& options) {
  return price_american(ensemble, strike, expiry, rate, exercise_steps, options, +1);
}

EuropeanPricing price_european(const PathEnsemble& ens, double strike, double expiry,
                               double rate, int payoff_flag) {
  const int nT = step_of(ens, expiry);
  const double df = std::exp(-rate * expiry);
  const int H = ens.J / 2;
  double sum = 0.0, sumsq = 0.0;
  for (int j = 0; j < H; ++j) {
    const double p1 = std::max(payoff_flag * (ens.X(j, nT) - strike), 0.0);
    const double p2 = std::max(payoff_flag * (ens.X(j + H, nT) - strike), 0.0);
    const double pair = 0.5 * df * (p1 + p2);
    sum += pair;
    sumsq += pair * pair;
  }
  EuropeanPricing out;
  out.price = sum / H;
  const double var = std::max(0.0, sumsq / H - out.price * out.price);
  out.std_error = std::sqrt(var / H);
  return out;
}

double binomial_price(double spot, double strike, double expiry, double sigma,
                      double rate, double div_yield, int payoff_flag,
                      Exercise exercise, int steps) {
  if (steps < 1) throw std::invalid_argument("binomial_price: steps must be >= 1");
  const double dt = expiry / steps;
  const double eta = payoff_flag;
  if (sigma < 1e-12) {
    // deterministic forward path
    if (exercise == Exercise::European) {
      const double fwd = spot * std::exp((rate - div_yield) * expiry);
      return std::exp(-rate * expiry) * std::max(eta * (fwd - strike), 0.0);
    }
    double best = std::max(eta * (spot - strike), 0.0);
    for (int n = 1; n <= steps; ++n) {
      const double t = n * dt;
      const double x = spot * std::exp((rate - div_yield) * t);
      best = std::max(best, std::exp(-rate * t) * std::max(eta * (x - strike), 0.0));
    }
    return best;
  }
  const double u = std::exp(sigma * std::sqrt(dt));
  const double d = 1.0 / u;
  const double disc = std::exp(-rate * dt);
  const double p = (std::exp((rate - div_yield) * dt) - d) / (u - d);
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("binomial_price: lattice probability outside (0,1); increase steps");
  }

  std::vector<double> value(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) {
    const double x = spot * std::pow(u, steps - i) * std::pow(d, i);
    value[static_cast<std::size_t>(i)] = std::max(eta * (x - strike), 0.0);
  }
  for (int n = steps - 1; n >= 0; --n) {
    for (int i = 0; i <= n; ++i) {
      double v = disc * (p * value[static_cast<std::size_t>(i)] +
                         (1.0 - p) * value[static_cast<std::size_t>(i) + 1]);
      if (exercise == Exercise::American) {
        const double x = spot * std::pow(u, n - i) * std::pow(d, i);
        v = std::max(v, eta * (x - strike));
      }
      value[static_cast<std::size_t>(i)] = v;
    }
  }
  return value[0];
}

}  // namespace lov
