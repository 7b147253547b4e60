#include "lov/lov_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace lov {

double centered_pairing(std::span<const double> ell_values, int spot_corridor,
                        std::span<const double> occupation,
                        std::span<const double> projected) {
  if (ell_values.size() != occupation.size() || occupation.size() != projected.size()) {
    throw std::invalid_argument("centered_pairing: length mismatch");
  }
  const double center = ell_values[static_cast<std::size_t>(spot_corridor)];
  double sum = 0.0;
  for (std::size_t m = 0; m < ell_values.size(); ++m) {
    sum += (ell_values[m] - center) * (occupation[m] - projected[m]);
  }
  return sum;
}

double lov_variance_with_ell(const LovModel& model, double t, double x,
                             std::span<const double> ell_values, int spot_corridor,
                             std::span<const double> occupation,
                             std::span<const double> projected, double total_mass,
                             long* clamp_counter) {
  const double s = model.surface->at(t, x);
  const double local_var = s * s;
  double var = local_var;
  if (total_mass > 0.0) {
    const double gamma = 1.0 / total_mass;
    double pairing;
    if (model.uncentered) {
      pairing = 0.0;
      for (std::size_t m = 0; m < ell_values.size(); ++m) {
        pairing += ell_values[m] * occupation[m];
      }
    } else {
      pairing = centered_pairing(ell_values, spot_corridor, occupation, projected);
    }
    const double correction = gamma * pairing;
    var = (model.mode == CorrectionMode::Additive) ? local_var + correction
                                                   : local_var * (1.0 + correction);
  }
  if (var < model.var_floor || var > model.var_cap) {
    if (clamp_counter) ++*clamp_counter;
    var = std::clamp(var, model.var_floor, model.var_cap);
  }
  return var;
}

double lov_variance(const LovModel& model, double t, double x,
                    std::span<const double> occupation,
                    std::span<const double> projected, double total_mass,
                    long* clamp_counter) {
  const auto& nodes = model.partition.nodes();
  std::vector<double> ell(nodes.size());
  for (std::size_t m = 0; m < nodes.size(); ++m) {
    ell[m] = eval(model.spec, t, x, nodes[m], model.partition);
  }
  return lov_variance_with_ell(model, t, x, ell, model.partition.locate(x),
                               occupation, projected, total_mass, clamp_counter);
}

PositivityReport check_positivity_bound(const LovModel& model,
                                        std::span<const double> t_grid,
                                        std::span<const double> x_grid) {
  PositivityReport report;
  report.worst_margin = std::numeric_limits<double>::infinity();
  for (double t : t_grid) {
    for (double x : x_grid) {
      double sup_ell = 0.0;
      for (double node : model.partition.nodes()) {
        sup_ell = std::max(sup_ell, std::fabs(eval(model.spec, t, x, node, model.partition)));
      }
      const double s = model.surface->at(t, x);
      const double bound =
          (model.mode == CorrectionMode::Multiplicative) ? 0.5 : 0.5 * s * s;
      const double margin = bound - sup_ell;
      if (margin < report.worst_margin) {
        report.worst_margin = margin;
        report.worst_t = t;
        report.worst_x = x;
      }
    }
  }
  report.pass = report.worst_margin > 0.0;
  return report;
}

}  // namespace lov
