#pragma once

#include <span>
#include <vector>

namespace lov {

/// Corridor partition of the positive half line around ascending nodes
/// x_1 < ... < x_M: corridor m is [x_m - eps_{m-1}, x_m + eps_m) with
/// eps_m = (x_{m+1}-x_m)/2, eps_0 = x_1 and eps_M = infinity. Corridors are
/// disjoint and cover [0, inf).
class CorridorPartition {
 public:
  explicit CorridorPartition(std::vector<double> nodes);

  /// Equally spaced nodes on [x0(1 - band_width), x0(1 + band_width)] with
  /// band_width = 2 sigma_ref sqrt(T), clipped below at 1e-6 x0.
  static CorridorPartition build(double x0, double sigma_ref, double T, int M);

  /// Index of the unique corridor containing x >= 0 (binary search).
  int locate(double x) const;

  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<double>& nodes() const { return nodes_; }
  /// Upper edges of corridors 0..M-2 (the last corridor is unbounded).
  const std::vector<double>& upper_edges() const { return upper_edges_; }

 private:
  std::vector<double> nodes_;
  std::vector<double> upper_edges_;
};

/// Exponential-clock occupation times of one path over a corridor partition.
/// The running total mass is tracked as a scalar in accumulation order, so
/// the total after n steps is bitwise equal to the deterministic sum
/// of the step weights e^{kappa t_j} dt, independent of the path.
class DiscreteOccupation {
 public:
  DiscreteOccupation(const CorridorPartition& partition, double kappa);

  /// Adds e^{kappa t} dt to the corridor containing x.
  void accumulate(double x, double t, double dt);

  double kappa() const { return kappa_; }
  double total_mass() const { return total_mass_; }
  const std::vector<double>& times() const { return times_; }
  const CorridorPartition& partition() const { return *partition_; }

  enum class Transform { Identity, Log };
  /// Occupation-weighted node average sum f(x_m) O_m / sum O_m.
  double barycenter(Transform transform = Transform::Identity) const;

 private:
  const CorridorPartition* partition_;
  std::vector<double> times_;
  double kappa_;
  double total_mass_ = 0.0;
};

/// Normalization gamma_t^kappa = kappa / (e^{kappa t} - 1), with the
/// continuous limit 1/t at kappa = 0.
double gamma_factor(double kappa, double t);

/// Discrete pairing sum_m ell[m] (occ[m] - projected[m]).
double pair_against(std::span<const double> ell_values,
                    std::span<const double> occupation,
                    std::span<const double> projected);

}  // namespace lov
