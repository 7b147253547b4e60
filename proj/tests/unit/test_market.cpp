#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "lov/black_scholes.hpp"
#include "lov/market.hpp"

using namespace lov;
namespace fs = std::filesystem;

namespace {

const MarketEnvironment kEnv{231.80, 0.037, 0.0, "2026-08-23"};

std::string write_tmp(const std::string& name, const std::string& content) {
  const auto path = fs::temp_directory_path() / name;
  std::ofstream(path) << content;
  return path.string();
}

}  // namespace

TEST_CASE("load_chain: single-row arithmetic and the spread filter") {
  const auto keep = write_tmp("chain_keep.csv",
                              "expiry_years,strike,flag,exercise,bid,ask\n"
                              "0.25,230,P,A,10.0,10.4\n");
  auto quotes = load_chain(keep, kEnv, 0.25);
  REQUIRE(quotes.size() == 1);
  CHECK(quotes[0].mid == doctest::Approx(10.2).epsilon(1e-15));
  CHECK(quotes[0].payoff_flag == -1);
  CHECK(quotes[0].exercise == Exercise::American);

  // same row, 33% spread -> filtered out
  const auto drop = write_tmp("chain_drop.csv",
                              "expiry_years,strike,flag,exercise,bid,ask\n"
                              "0.25,230,P,A,1.0,1.4\n");
  CHECK(load_chain(drop, kEnv, 0.25).empty());
}

TEST_CASE("load_chain: fixture counts per expiry and stable ordering") {
  const std::string path = std::string(TEST_DATA_DIR) + "/chain.csv";
  auto quotes = load_chain(path, kEnv, 0.25);
  // fixture: 32 rows, 2 of which are wide-spread and filtered
  CHECK(quotes.size() == 30);
  std::map<double, int> per_expiry;
  for (const auto& q : quotes) ++per_expiry[q.expiry];
  CHECK(per_expiry.size() == 5);
  for (const auto& [expiry, count] : per_expiry) CHECK(count == 6);

  for (std::size_t i = 1; i < quotes.size(); ++i) {
    const auto& a = quotes[i - 1];
    const auto& b = quotes[i];
    CHECK((a.expiry < b.expiry ||
           (a.expiry == b.expiry &&
            (a.strike < b.strike ||
             (a.strike == b.strike && a.payoff_flag <= b.payoff_flag)))));
  }
  // idempotent / order-stable across runs
  auto again = load_chain(path, kEnv, 0.25);
  REQUIRE(again.size() == quotes.size());
  for (std::size_t i = 0; i < quotes.size(); ++i) {
    CHECK(again[i].strike == quotes[i].strike);
    CHECK(again[i].expiry == quotes[i].expiry);
    CHECK(again[i].mid == quotes[i].mid);
  }
}

TEST_CASE("load_chain: malformed rows fail with line numbers") {
  const auto crossed = write_tmp("chain_crossed.csv",
                                 "expiry_years,strike,flag,exercise,bid,ask\n"
                                 "0.25,230,P,A,10.5,10.0\n");
  CHECK_THROWS_WITH_AS(load_chain(crossed, kEnv, 0.25),
                       doctest::Contains("line 2"), std::runtime_error);

  const auto negative = write_tmp("chain_negative.csv",
                                  "expiry_years,strike,flag,exercise,bid,ask\n"
                                  "0.25,230,P,A,10.0,10.4\n"
                                  "0.25,240,P,A,-1.0,0.4\n");
  CHECK_THROWS_WITH_AS(load_chain(negative, kEnv, 0.25),
                       doctest::Contains("line 3"), std::runtime_error);

  const auto garbled = write_tmp("chain_garbled.csv",
                                 "expiry_years,strike,flag,exercise,bid,ask\n"
                                 "0.25,230,X,A,10.0,10.4\n");
  CHECK_THROWS(load_chain(garbled, kEnv, 0.25));
  CHECK_THROWS(load_chain("/nonexistent/chain.csv", kEnv, 0.25));
}

TEST_CASE("load_environment round trip") {
  const auto env = load_environment(std::string(TEST_DATA_DIR) + "/env.json");
  CHECK(env.spot == doctest::Approx(231.80));
  CHECK(env.rate == doctest::Approx(0.037));
  CHECK(env.dividend_yield == 0.0);
}

TEST_CASE("calibration_weights: formula, floor, and spread linearity") {
  // Lone ATM put, no calls at the expiry: Vega from the put's own mid vol.
  std::vector<OptionQuote> quotes;
  OptionQuote q;
  q.strike = 230.0;
  q.expiry = 0.25;
  q.payoff_flag = -1;
  q.exercise = Exercise::American;
  q.bid = 10.9;
  q.ask = 11.3;
  q.mid = 11.1;
  quotes.push_back(q);

  auto w = calibration_weights(quotes, kEnv, 1e-2);
  const double vol = implied_vol(11.1, kEnv.spot, 230.0, 0.25, kEnv.rate, 0.0, -1).sigma;
  const double vega = bs_vega(kEnv.spot, 230.0, 0.25, vol, kEnv.rate, 0.0);
  CHECK(w[0] == doctest::Approx(1.0 / (vega * 0.4)).epsilon(1e-12));

  // mid below the European lower bound: vol pins at 0, Vega floored,
  // w = (1e-2)^-1 / spread
  std::vector<OptionQuote> itm;
  q.strike = 400.0;
  q.bid = 160.0;
  q.ask = 160.2;
  q.mid = 160.1;  // bound is 400 e^{-rT} - S = 164.5
  itm.push_back(q);
  auto w2 = calibration_weights(itm, kEnv, 1e-2);
  CHECK(w2[0] == doctest::Approx(100.0 / 0.2).epsilon(1e-9));

  // doubling the spread around the same mid halves the weight exactly
  std::vector<OptionQuote> wide = quotes;
  wide[0].bid = 10.7;
  wide[0].ask = 11.5;
  wide[0].mid = 11.1;
  auto w3 = calibration_weights(wide, kEnv, 1e-2);
  CHECK(w3[0] == doctest::Approx(0.5 * w[0]).epsilon(1e-12));

  // zero spread is undefined
  std::vector<OptionQuote> degenerate = quotes;
  degenerate[0].ask = degenerate[0].bid;
  CHECK_THROWS(calibration_weights(degenerate, kEnv, 1e-2));
}

TEST_CASE("calibration_weights: put Vega interpolated from the call skew") {
  // Calls at 220 and 240 with distinct vols; the 230 put should get the
  // interpolated vol, not its own.
  const double v220 = 0.35, v240 = 0.25;
  std::vector<OptionQuote> quotes;
  auto add = [&](double strike, int flag, Exercise ex, double mid) {
    OptionQuote q;
    q.strike = strike;
    q.expiry = 0.25;
    q.payoff_flag = flag;
    q.exercise = ex;
    q.bid = mid - 0.2;
    q.ask = mid + 0.2;
    q.mid = mid;
    quotes.push_back(q);
  };
  add(220, +1, Exercise::European,
      bs_price(kEnv.spot, 220, 0.25, v220, kEnv.rate, 0.0, +1));
  add(240, +1, Exercise::European,
      bs_price(kEnv.spot, 240, 0.25, v240, kEnv.rate, 0.0, +1));
  add(230, -1, Exercise::American, 9.0);

  calibration_weights(quotes, kEnv, 1e-2);
  const double vol_mid = 0.5 * (v220 + v240);
  const double vega = bs_vega(kEnv.spot, 230, 0.25, vol_mid, kEnv.rate, 0.0);
  CHECK(quotes[2].weight == doctest::Approx(1.0 / (vega * 0.4)).epsilon(1e-6));
}
