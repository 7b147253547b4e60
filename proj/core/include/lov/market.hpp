#pragma once

#include <string>
#include <vector>

namespace lov {

enum class Exercise { European, American };

/// One quoted instrument from an option chain.
struct OptionQuote {
  double strike = 0.0;
  double expiry = 0.0;      ///< year fraction
  int payoff_flag = 1;      ///< +1 call, -1 put
  Exercise exercise = Exercise::European;
  double bid = 0.0;
  double ask = 0.0;
  double mid = 0.0;         ///< (bid+ask)/2
  double weight = 0.0;      ///< calibration weight, filled by calibration_weights
};

struct MarketEnvironment {
  double spot = 0.0;
  double rate = 0.0;
  double dividend_yield = 0.0;
  std::string valuation_date;
};

/// Load an option chain from CSV (header
/// `expiry_years,strike,flag,exercise,bid,ask`), dropping quotes whose
/// percentage bid-ask spread (ask-bid)/mid exceeds `max_rel_spread`.
/// Output is sorted by (expiry, strike, flag). Parse problems, negative
/// prices and crossed markets throw with the offending line number.
std::vector<OptionQuote> load_chain(const std::string& path,
                                    const MarketEnvironment& env,
                                    double max_rel_spread);

/// Load a MarketEnvironment from a JSON file
/// `{spot, rate, dividend_yield, valuation_date}`.
MarketEnvironment load_environment(const std::string& path);

/// Calibration weights w_i = (max(vega_i, vega_floor))^-1 / (ask_i - bid_i).
/// The Vega is evaluated at the quote's mid implied vol; where call quotes
/// exist at the same expiry their implied-vol skew is interpolated at the
/// quote's strike instead (puts are American, calls are de facto European).
/// Weights are written into the quotes and also returned.
std::vector<double> calibration_weights(std::vector<OptionQuote>& quotes,
                                        const MarketEnvironment& env,
                                        double vega_floor = 1e-2);

}  // namespace lov
