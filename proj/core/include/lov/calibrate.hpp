#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lov/lsmc.hpp"
#include "lov/lov_model.hpp"
#include "lov/market.hpp"
#include "lov/simulate.hpp"

namespace lov {

/// Weighted RMSE L = sqrt(1/I sum |w_i (p_i - mid_i)|^2).
double calibration_loss(std::span<const double> prices,
                        const std::vector<OptionQuote>& quotes);

/// Bid/ask stopping threshold
/// alpha = 1/2 sqrt(1/I sum |w_i (ask_i - bid_i)|^2); with the standard
/// weights each term reduces to the inverse floored Vega, so alpha is
/// invariant to uniform spread rescaling.
double threshold_alpha(const std::vector<OptionQuote>& quotes);

// --- parameter views over sensitivity specs --------------------------------

int spec_param_dim(const SensitivitySpec& spec);
Eigen::VectorXd spec_get_theta(const SensitivitySpec& spec);
void spec_set_theta(SensitivitySpec& spec, const Eigen::VectorXd& theta);

// --- pricing one batch -----------------------------------------------------

struct PricedBatch {
  PathEnsemble ensemble;
  std::vector<double> prices;
  /// Per American instrument: stopping step per path (-1 when worthless).
  std::vector<std::vector<int>> stops;
};

/// Simulates one ensemble under `model` and prices every instrument off it.
/// American puts go through LSMC; with `european_payoff` every instrument is
/// priced as European instead (gradient validation variant).
PricedBatch price_batch(const LovModel& model, const SimConfig& sim,
                        const MarketEnvironment& env,
                        const std::vector<OptionQuote>& instruments,
                        bool european_payoff = false, GradientTape* tape = nullptr);

struct LossAndGradient {
  double loss = 0.0;
  Eigen::VectorXd grad;
  std::vector<double> prices;
};

/// Frozen-exercise pathwise gradient: one simulate+price pass with current
/// parameters, then reverse-mode accumulation through the X recursion and the
/// sensitivity evaluations, holding stopping times, kernel weights, corridor
/// assignments and regression coefficients fixed.
LossAndGradient pathwise_loss_gradient(const LovModel& model, const SimConfig& sim,
                                       const MarketEnvironment& env,
                                       const std::vector<OptionQuote>& instruments,
                                       bool european_payoff = false);

/// Central finite differences with common random numbers, one full
/// simulate+price pass per coordinate and side. Practical for small
/// parametric specs only.
LossAndGradient fd_loss_gradient(const LovModel& model, const SimConfig& sim,
                                 const MarketEnvironment& env,
                                 const std::vector<OptionQuote>& instruments,
                                 double step = 1e-4, bool european_payoff = false);

// --- the calibration loop --------------------------------------------------

enum class GradientMethod { PathwiseFrozen, FiniteDifference };

struct BatchStage {
  int start_epoch = 0;
  int pairs = 256;  ///< antithetic pairs; J = 2 * pairs
};

struct CalibConfig {
  SimConfig sim;  ///< T must cover the longest instrument expiry
  std::vector<BatchStage> schedule{{0, 256}};
  int epoch_limit = 1000;
  int window = 50;                 ///< trailing stopping window
  double window_range_frac = 0.05; ///< max window range as a fraction of alpha
  double learning_rate = 1e-3;
  GradientMethod method = GradientMethod::PathwiseFrozen;
  std::uint64_t seed = 0;          ///< batch seeds advance from here each epoch
  std::uint64_t holdout_seed = 900001;
  int final_pairs = 1 << 12;       ///< held-out pricing pass
  int checkpoint_every = 0;        ///< epochs between checkpoints (0: final only)
  double fd_step = 1e-4;
  std::string out_dir;             ///< when set: loss history, checkpoints, report
};

struct EpochRecord {
  int epoch;
  double loss;
  double alpha;
  int paths;
};

struct CalibrationResult {
  Eigen::VectorXd theta;
  std::vector<EpochRecord> history;
  bool converged = false;
  double alpha = 0.0;
  double final_loss = 0.0;        ///< held-out pass at final_pairs
  std::vector<double> final_prices;
};

/// Algorithm: repeat {simulate, LSMC-price, loss, Adam step} until the
/// trailing loss window sits below alpha (and has stabilized) or the epoch
/// limit is reached. Instruments must carry calibration weights.
CalibrationResult calibrate(LovModel& model, const CalibConfig& config,
                            const MarketEnvironment& env,
                            const std::vector<OptionQuote>& instruments);

}  // namespace lov
