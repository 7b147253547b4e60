#include "lov/market.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "lov/black_scholes.hpp"

namespace lov {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

[[noreturn]] void parse_fail(int line_no, const std::string& what) {
  throw std::runtime_error("chain parse error at line " + std::to_string(line_no) +
                           ": " + what);
}

}  // namespace

std::vector<OptionQuote> load_chain(const std::string& path,
                                    const MarketEnvironment& env,
                                    double max_rel_spread) {
  (void)env;
  if (!(max_rel_spread > 0.0 && max_rel_spread <= 1.0)) {
    throw std::invalid_argument("load_chain: max_rel_spread must lie in (0,1]");
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_chain: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_chain: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "expiry_years,strike,flag,exercise,bid,ask") {
    parse_fail(1, "unexpected header '" + line + "'");
  }

  std::vector<OptionQuote> quotes;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 6) parse_fail(line_no, "expected 6 columns");
    OptionQuote q;
    try {
      q.expiry = std::stod(cells[0]);
      q.strike = std::stod(cells[1]);
      q.bid = std::stod(cells[4]);
      q.ask = std::stod(cells[5]);
    } catch (const std::exception&) {
      parse_fail(line_no, "invalid number");
    }
    if (cells[2] == "C") q.payoff_flag = 1;
    else if (cells[2] == "P") q.payoff_flag = -1;
    else parse_fail(line_no, "flag must be C or P");
    if (cells[3] == "E") q.exercise = Exercise::European;
    else if (cells[3] == "A") q.exercise = Exercise::American;
    else parse_fail(line_no, "exercise must be E or A");
    if (q.strike <= 0.0 || q.expiry <= 0.0) parse_fail(line_no, "strike and expiry must be positive");
    if (q.bid < 0.0 || q.ask < 0.0) parse_fail(line_no, "negative price");
    if (q.bid > q.ask) parse_fail(line_no, "crossed market (bid > ask)");
    q.mid = 0.5 * (q.bid + q.ask);
    if (q.mid > 0.0 && (q.ask - q.bid) / q.mid > max_rel_spread) continue;
    quotes.push_back(q);
  }
  std::stable_sort(quotes.begin(), quotes.end(),
                   [](const OptionQuote& a, const OptionQuote& b) {
                     if (a.expiry != b.expiry) return a.expiry < b.expiry;
                     if (a.strike != b.strike) return a.strike < b.strike;
                     return a.payoff_flag < b.payoff_flag;
                   });
  return quotes;
}

MarketEnvironment load_environment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_environment: cannot open " + path);
  nlohmann::json j;
  in >> j;
  MarketEnvironment env;
  env.spot = j.at("spot").get<double>();
  env.rate = j.at("rate").get<double>();
  env.dividend_yield = j.value("dividend_yield", 0.0);
  env.valuation_date = j.value("valuation_date", std::string{});
  if (env.spot <= 0.0) throw std::runtime_error("load_environment: spot must be positive");
  if (env.dividend_yield < 0.0) {
    throw std::runtime_error("load_environment: dividend_yield must be nonnegative");
  }
  return env;
}

std::vector<double> calibration_weights(std::vector<OptionQuote>& quotes,
                                        const MarketEnvironment& env,
                                        double vega_floor) {
  if (vega_floor <= 0.0) {
    throw std::invalid_argument("calibration_weights: vega_floor must be positive");
  }
  // Per-expiry call implied-vol skew: strike -> vol.
  std::map<double, std::map<double, double>> call_skew;
  for (const auto& q : quotes) {
    if (q.payoff_flag != 1) continue;
    try {
      const auto iv = implied_vol(q.mid, env.spot, q.strike, q.expiry, env.rate,
                                  env.dividend_yield, +1);
      if (!iv.at_intrinsic) call_skew[q.expiry][q.strike] = iv.sigma;
    } catch (const ArbitrageViolation&) {
      // unusable quote for the skew, fall back to the put's own vol
    }
  }
  auto skew_vol = [&](double expiry, double strike) -> double {
    auto it = call_skew.find(expiry);
    if (it == call_skew.end() || it->second.empty()) return -1.0;
    const auto& skew = it->second;
    auto hi = skew.lower_bound(strike);
    if (hi == skew.end()) return std::prev(hi)->second;  // flat beyond last strike
    if (hi == skew.begin() || hi->first == strike) return hi->second;
    const auto lo = std::prev(hi);
    const double w = (strike - lo->first) / (hi->first - lo->first);
    return (1.0 - w) * lo->second + w * hi->second;
  };

  std::vector<double> weights;
  weights.reserve(quotes.size());
  for (auto& q : quotes) {
    const double spread = q.ask - q.bid;
    if (spread <= 0.0) {
      throw std::runtime_error("calibration_weights: zero bid-ask spread");
    }
    double vol = skew_vol(q.expiry, q.strike);
    if (vol < 0.0) {
      try {
        vol = implied_vol(q.mid, env.spot, q.strike, q.expiry, env.rate,
                          env.dividend_yield, q.payoff_flag)
                  .sigma;
      } catch (const ArbitrageViolation&) {
        vol = 0.0;
      }
    }
    const double vega =
        bs_vega(env.spot, q.strike, q.expiry, vol, env.rate, env.dividend_yield);
    q.weight = 1.0 / (std::max(vega, vega_floor) * spread);
    weights.push_back(q.weight);
  }
  return weights;
}

}  // namespace lov
