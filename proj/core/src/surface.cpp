#include "lov/surface.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lov {

namespace {

constexpr double kMinLocalVariance = 1e-4;  // sigma_loc >= 1%
constexpr double kMaxLocalVariance = 4.0;   // sigma_loc <= 200%

void check_ascending(const std::vector<double>& v, const char* what) {
  if (v.empty()) throw std::invalid_argument(std::string(what) + " grid is empty");
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) {
      throw std::invalid_argument(std::string(what) + " grid must be strictly ascending");
    }
  }
}

// Index i and weight w such that the query sits between knots i and i+1;
// clamps to the edges for flat extrapolation.
std::pair<std::size_t, double> bracket(const std::vector<double>& knots, double q) {
  if (knots.size() == 1 || q <= knots.front()) return {0, 0.0};
  if (q >= knots.back()) return {knots.size() - 2, 1.0};
  const auto it = std::upper_bound(knots.begin(), knots.end(), q);
  const std::size_t i = static_cast<std::size_t>(it - knots.begin()) - 1;
  return {i, (q - knots[i]) / (knots[i + 1] - knots[i])};
}

}  // namespace

VolGrid::VolGrid(std::vector<double> times, std::vector<double> strikes,
                 std::vector<double> values)
    : times_(std::move(times)), strikes_(std::move(strikes)), values_(std::move(values)) {
  check_ascending(times_, "time");
  check_ascending(strikes_, "strike");
  if (values_.size() != times_.size() * strikes_.size()) {
    throw std::invalid_argument("VolGrid: values size does not match grid");
  }
  for (double v : values_) {
    if (!(v > 0.0)) throw std::invalid_argument("VolGrid: vols must be positive");
  }
  log_strikes_.reserve(strikes_.size());
  for (double k : strikes_) {
    if (!(k > 0.0)) throw std::invalid_argument("VolGrid: strikes must be positive");
    log_strikes_.push_back(std::log(k));
  }
}

double VolGrid::at(double t, double x) const {
  const auto [it, wt] = bracket(times_, t);
  const auto [ik, wk] = bracket(log_strikes_, std::log(std::max(x, 1e-300)));
  const std::size_t K = strikes_.size();
  const std::size_t it1 = std::min(it + 1, times_.size() - 1);
  const std::size_t ik1 = std::min(ik + 1, K - 1);
  const double v00 = values_[it * K + ik], v01 = values_[it * K + ik1];
  const double v10 = values_[it1 * K + ik], v11 = values_[it1 * K + ik1];
  return (1.0 - wt) * ((1.0 - wk) * v00 + wk * v01) +
         wt * ((1.0 - wk) * v10 + wk * v11);
}

double VolGrid::dx(double t, double x) const {
  if (strikes_.size() == 1) return 0.0;
  const double y = std::log(std::max(x, 1e-300));
  if (y <= log_strikes_.front() || y >= log_strikes_.back()) return 0.0;
  const auto [it, wt] = bracket(times_, t);
  const auto [ik, wk] = bracket(log_strikes_, y);
  (void)wk;
  const std::size_t K = strikes_.size();
  const std::size_t it1 = std::min(it + 1, times_.size() - 1);
  const double slope0 = (values_[it * K + ik + 1] - values_[it * K + ik]) /
                        (log_strikes_[ik + 1] - log_strikes_[ik]);
  const double slope1 = (values_[it1 * K + ik + 1] - values_[it1 * K + ik]) /
                        (log_strikes_[ik + 1] - log_strikes_[ik]);
  return ((1.0 - wt) * slope0 + wt * slope1) / x;  // d/dx = (d/dlnx)/x
}

double LocalVolSurface::min_local_variance(double t_max) const {
  if (!(t_max > 0.0)) throw std::invalid_argument("min_local_variance: t_max must be positive");
  const auto& times = grid.times();
  const auto& strikes = grid.strikes();
  double best = grid.value(0, 0);
  bool any = false;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] > t_max && any) break;
    for (std::size_t k = 0; k < strikes.size(); ++k) {
      const double v = grid.value(i, k);
      if (!any || v < best) best = v;
      any = true;
    }
  }
  return best * best;
}

LocalVolSurface dupire_from_implied(const ImpliedVolSurface& iv,
                                    const MarketEnvironment& env,
                                    std::vector<DupireWarning>* warnings) {
  const auto& times = iv.grid.times();
  const auto& strikes = iv.grid.strikes();
  const std::size_t NT = times.size(), NK = strikes.size();
  if (NT < 3 || NK < 3) {
    throw std::invalid_argument("dupire_from_implied: grid must be at least 3x3");
  }

  // Total implied variance w(T,K) = sigma_imp^2 T.
  auto w_at = [&](std::size_t i, std::size_t k) {
    const double s = iv.grid.value(i, k);
    return s * s * times[i];
  };

  const double carry = env.rate - env.dividend_yield;
  std::vector<double> local(NT * NK);
  for (std::size_t i = 0; i < NT; ++i) {
    const double T = times[i];
    const double fwd = env.spot * std::exp(carry * T);
    // time derivative at fixed K (one-sided at the edges)
    const std::size_t im = (i == 0) ? 0 : i - 1;
    const std::size_t ip = (i == NT - 1) ? NT - 1 : i + 1;
    for (std::size_t k = 0; k < NK; ++k) {
      const double K = strikes[k];
      const double y = std::log(K / fwd);
      const double w = w_at(i, k);

      const double dwdT_K = (w_at(ip, k) - w_at(im, k)) / (times[ip] - times[im]);

      const std::size_t km = (k == 0) ? 0 : k - 1;
      const std::size_t kp = (k == NK - 1) ? NK - 1 : k + 1;
      const double dK = strikes[kp] - strikes[km];
      const double dwdK = (w_at(i, kp) - w_at(i, km)) / dK;
      double d2wdK2;
      if (k == 0 || k == NK - 1) {
        d2wdK2 = 0.0;  // flat wings
      } else {
        const double hl = strikes[k] - strikes[km], hr = strikes[kp] - strikes[k];
        d2wdK2 = 2.0 * (hl * w_at(i, kp) - (hl + hr) * w + hr * w_at(i, km)) /
                 (hl * hr * (hl + hr));
      }
      // Chain rule from K to log-moneyness y and calendar time at fixed y.
      const double dwdy = K * dwdK;
      const double d2wdy2 = K * K * d2wdK2 + K * dwdK;
      const double dwdT = dwdT_K + carry * K * dwdK;

      double var;
      if (w <= 0.0) {
        var = dwdT;
      } else {
        const double denom = 1.0 - (y / w) * dwdy +
                             0.25 * (-0.25 - 1.0 / w + y * y / (w * w)) * dwdy * dwdy +
                             0.5 * d2wdy2;
        var = (denom > 1e-12) ? dwdT / denom : -1.0;
      }
      if (!(var >= kMinLocalVariance && var <= kMaxLocalVariance)) {
        if (warnings) warnings->push_back({i, k, var});
        var = std::clamp(std::isfinite(var) ? var : kMinLocalVariance,
                         kMinLocalVariance, kMaxLocalVariance);
      }
      local[i * NK + k] = std::sqrt(var);
    }
  }
  return LocalVolSurface{VolGrid(times, strikes, std::move(local))};
}

VolGrid read_surface_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_surface_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_surface_csv: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<double> strikes;
  {
    std::stringstream ss(line);
    std::string cell;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      if (first) { first = false; continue; }  // corner cell
      strikes.push_back(std::stod(cell));
    }
  }
  std::vector<double> times, values;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    times.push_back(std::stod(cell));
    std::size_t count = 0;
    while (std::getline(ss, cell, ',')) {
      values.push_back(std::stod(cell));
      ++count;
    }
    if (count != strikes.size()) {
      throw std::runtime_error("read_surface_csv: ragged row in " + path);
    }
  }
  return VolGrid(std::move(times), std::move(strikes), std::move(values));
}

void write_surface_csv(const std::string& path, const VolGrid& grid) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_surface_csv: cannot open " + path);
  out.precision(17);
  for (double k : grid.strikes()) out << ',' << k;
  out << '\n';
  for (std::size_t i = 0; i < grid.times().size(); ++i) {
    out << grid.times()[i];
    for (std::size_t k = 0; k < grid.strikes().size(); ++k) out << ',' << grid.value(i, k);
    out << '\n';
  }
}

}  // namespace lov
