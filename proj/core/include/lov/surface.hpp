#pragma once

#include <string>
#include <vector>

#include "lov/market.hpp"

namespace lov {

/// Rectilinear vol grid with bilinear interpolation in (t, ln strike) and
/// flat extrapolation beyond the edges. Immutable after construction.
class VolGrid {
 public:
  VolGrid() = default;
  VolGrid(std::vector<double> times, std::vector<double> strikes,
          std::vector<double> values);  // row-major, times x strikes

  double at(double t, double x) const;
  /// Derivative of at() with respect to x (piecewise within grid cells,
  /// zero in the flat extrapolation region).
  double dx(double t, double x) const;

  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& strikes() const { return strikes_; }
  const std::vector<double>& values() const { return values_; }
  double value(std::size_t it, std::size_t ik) const {
    return values_[it * strikes_.size() + ik];
  }

 private:
  std::vector<double> times_, strikes_, log_strikes_, values_;
};

struct LocalVolSurface {
  VolGrid grid;

  /// sigma_loc(t, x), strictly positive.
  double at(double t, double x) const { return grid.at(t, x); }
  /// d(sigma_loc^2)/dx at (t, x).
  double variance_dx(double t, double x) const {
    return 2.0 * grid.at(t, x) * grid.dx(t, x);
  }
  /// Minimum of sigma_loc^2 over stored nodes with t <= t_max.
  double min_local_variance(double t_max) const;
};

struct ImpliedVolSurface {
  VolGrid grid;
};

struct DupireWarning {
  std::size_t time_index, strike_index;
  double raw_variance;  ///< pre floor/cap value
};

/// Dupire local volatility in total-implied-variance / log-moneyness form.
/// Finite differences on the grid (central inside, one-sided at edges);
/// local variance is floored at 1e-4 and capped at 4.0 with out-of-band
/// nodes reported in `warnings`.
LocalVolSurface dupire_from_implied(const ImpliedVolSurface& iv,
                                    const MarketEnvironment& env,
                                    std::vector<DupireWarning>* warnings = nullptr);

/// Surface CSV: first row = strike grid (leading cell empty), first column =
/// time grid, body = vols.
VolGrid read_surface_csv(const std::string& path);
void write_surface_csv(const std::string& path, const VolGrid& grid);

}  // namespace lov
