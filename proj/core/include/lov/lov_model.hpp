#pragma once

#include <span>
#include <string>

#include "lov/occupation.hpp"
#include "lov/sensitivity.hpp"
#include "lov/surface.hpp"

namespace lov {

enum class CorrectionMode { Additive, Multiplicative };

/// The LOV variance assembly: local volatility surface plus the
/// occupation-sensitivity correction
///   additive:        sigma^2 = sigma_loc^2 + gamma * sum_m ell_m (O_m - Ohat_m)
///   multiplicative:  sigma^2 = sigma_loc^2 (1 + gamma * sum_m ell_m (O_m - Ohat_m))
/// with gamma the inverse of the discrete total occupation mass. Results are
/// clamped to [var_floor, var_cap] with an event counter.
struct LovModel {
  const LocalVolSurface* surface = nullptr;
  CorridorPartition partition;
  SensitivitySpec spec;
  CorrectionMode mode = CorrectionMode::Additive;
  double kappa = 0.0;
  double var_floor = 1e-4;
  double var_cap = 4.0;
  bool uncentered = false;  ///< drop Ohat from the correction (dividend variant)
};

/// Correction pairing with the ell values centered at the spot's own
/// corridor. Since the difference measure O - Ohat has zero total mass, the
/// centering leaves the value unchanged in exact arithmetic and makes a
/// constant sensitivity cancel bitwise.
double centered_pairing(std::span<const double> ell_values, int spot_corridor,
                        std::span<const double> occupation,
                        std::span<const double> projected);

/// Variance from precomputed ell values at the partition nodes.
double lov_variance_with_ell(const LovModel& model, double t, double x,
                             std::span<const double> ell_values, int spot_corridor,
                             std::span<const double> occupation,
                             std::span<const double> projected, double total_mass,
                             long* clamp_counter = nullptr);

/// Variance at (t, x) given realized and projected occupation vectors.
/// Zero total mass returns sigma_loc^2 exactly (empty-measure convention).
double lov_variance(const LovModel& model, double t, double x,
                    std::span<const double> occupation,
                    std::span<const double> projected, double total_mass,
                    long* clamp_counter = nullptr);

struct PositivityReport {
  bool pass = false;
  double worst_margin = 0.0;  ///< min over the grid of 0.5 sigma_loc^2 - sup_x |ell|
  double worst_t = 0.0, worst_x = 0.0;
};

/// Checks |ell(t,x',x)| < 0.5 sigma_loc^2(t,x') over a (t, x') grid, taking
/// the sup over the partition nodes x. In multiplicative mode the bound is
/// |ell| < 1/2.
PositivityReport check_positivity_bound(const LovModel& model,
                                        std::span<const double> t_grid,
                                        std::span<const double> x_grid);

}  // namespace lov
