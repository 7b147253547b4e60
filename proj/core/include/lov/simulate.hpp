#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "lov/lov_model.hpp"
#include "lov/market.hpp"

namespace lov {

struct SimConfig {
  double T = 1.0;
  int N = 252;            ///< time steps, dt = T/N
  int J = 1 << 12;        ///< paths, even (antithetic pairs j, j+J/2)
  double kappa = 0.0;
  int M = 63;             ///< corridors
  std::uint64_t seed = 0;
  double sigma_ref = 0.2;      ///< ATMF vol for the corridor band x0(1 +- 2 sigma_ref sqrt(T))
  double bandwidth_mult = 1.5; ///< kernel bandwidth multiplier
  double var_floor = 1e-4;
  double var_cap = 4.0;
  bool record_bands = false;   ///< per-date aggregate occupations (needed by LSMC)
  bool record_tape = false;    ///< per-step state for pathwise gradients
};

/// Simulated ensemble on the uniform grid t_n = n dt. Path j and j + J/2 are
/// an antithetic pair (negated normal draws).
struct PathEnsemble {
  int J = 0, N = 0, M = 0;
  double T = 0.0, dt = 0.0, kappa = 0.0;
  double x0 = 0.0, rate = 0.0, div_yield = 0.0;
  std::uint64_t seed = 0;

  Eigen::MatrixXd X;           ///< J x (N+1), X(j,n) = X_{t_n}
  Eigen::MatrixXd sigma;       ///< J x N, vol applied over [t_n, t_{n+1})
  std::vector<double> occupation;  ///< J x M row-major, O_{t_N}
  std::vector<double> band_occ;    ///< if recorded: (n,j,b) -> band_occ[((n-1)*J+j)*5+b], O_{t_n}(A_b), n=1..N
  long clamp_events = 0;
  double mass_residual = 0.0;  ///< max |rowsum(Ohat) - total mass| seen in projection

  /// Deterministic total occupation mass at t_N (bitwise equal to every
  /// path's accumulated total).
  double total_mass = 0.0;
};

/// Per-step record for frozen-everything pathwise differentiation.
struct GradientTape {
  int J = 0, N = 0, M = 0;
  std::vector<float> diff;            ///< (n*J+j)*M+m -> O_m - Ohat_m at step n
  std::vector<std::uint16_t> corridor; ///< n*J+j -> corridor of X_{t_n}
  std::vector<std::uint8_t> clamped;   ///< n*J+j -> variance clamp hit at step n
  std::vector<double> gamma;           ///< per step (0 when mass is empty)
  std::vector<double> local_var;       ///< n*J+j -> sigma_loc^2(t_n, X_{t_n})
};

/// Quartic (biweight) kernel 15/16 (1-(d/h)^2)^2 / h on |d| < h.
double quartic_kernel(double delta, double h);

/// Kernel bandwidth: mult * sd(x) * J^{-1/5}, floored at 1e-8 * mean(x).
double bandwidth(const Eigen::VectorXd& x, double mult = 1.5);

struct ProjectionEstimate {
  std::vector<double> projected;  ///< J x M row-major
  double h = 0.0;
};

/// Nadaraya-Watson projection of per-path occupation rows onto the current
/// spots: Ohat_m(j) = sum_j' psi(X_j - X_j') O_m(j') / sum_j' psi. Self-weight
/// included; compact support exploited by sorting the spots.
ProjectionEstimate project_occupation(const std::vector<double>& occupation, int J,
                                      int M, const Eigen::VectorXd& x_now, double h);

/// Algorithm: for each step project the occupation flow, evaluate the LOV
/// variance, advance X by log-Euler and accrue occupation time at X_{t_n}.
/// The correction term is zero at the first step (empty measure).
PathEnsemble simulate_lov(const SimConfig& config, const MarketEnvironment& env,
                          const LovModel& model, GradientTape* tape = nullptr);

/// Convenience overload assembling the model internally.
PathEnsemble simulate_lov(const SimConfig& config, const MarketEnvironment& env,
                          const LocalVolSurface& surface, const SensitivitySpec& spec,
                          CorrectionMode mode = CorrectionMode::Additive);

/// Trend-based toy model: dX = sigma X dW with
/// sigma = Sigma(Upsilon), Sigma(y) = -alpha/beta + gamma y^-beta and
/// Upsilon = X / barycenter(O). Upsilon = 1 on the empty measure.
PathEnsemble simulate_guyon_toy(const SimConfig& config, const MarketEnvironment& env,
                                double alpha, double beta, double gamma_toy);

/// Aggregate-band boundaries for M corridors split into 5 bands:
/// band b (0-based) covers corridor indices [bounds[b], bounds[b+1]).
std::vector<int> band_bounds(int M);

}  // namespace lov
