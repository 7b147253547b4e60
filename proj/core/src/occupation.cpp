#include "lov/occupation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lov {

CorridorPartition::CorridorPartition(std::vector<double> nodes)
    : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw std::invalid_argument("CorridorPartition: no nodes");
  for (std::size_t m = 0; m < nodes_.size(); ++m) {
    if (!(nodes_[m] > 0.0)) throw std::invalid_argument("CorridorPartition: nodes must be positive");
    if (m > 0 && !(nodes_[m] > nodes_[m - 1])) {
      throw std::invalid_argument("CorridorPartition: nodes must be strictly ascending");
    }
  }
  upper_edges_.reserve(nodes_.size() - 1);
  for (std::size_t m = 0; m + 1 < nodes_.size(); ++m) {
    upper_edges_.push_back(nodes_[m] + 0.5 * (nodes_[m + 1] - nodes_[m]));
  }
}

CorridorPartition CorridorPartition::build(double x0, double sigma_ref, double T, int M) {
  if (M < 1) throw std::invalid_argument("build_partition: M must be >= 1");
  if (!(x0 > 0.0 && sigma_ref > 0.0 && T > 0.0)) {
    throw std::invalid_argument("build_partition: x0, sigma_ref, T must be positive");
  }
  const double band = 2.0 * sigma_ref * std::sqrt(T);
  const double floor = 1e-6 * x0;
  double lo = std::max(x0 * (1.0 - band), floor);
  const double hi = x0 * (1.0 + band);
  if (!(lo < hi)) throw std::invalid_argument("build_partition: empty node band");
  std::vector<double> nodes(M);
  if (M == 1) {
    nodes[0] = x0;
  } else {
    const double step = (hi - lo) / (M - 1);
    for (int m = 0; m < M; ++m) nodes[m] = lo + m * step;
  }
  return CorridorPartition(std::move(nodes));
}

int CorridorPartition::locate(double x) const {
  if (x < 0.0) throw std::invalid_argument("locate: x must be nonnegative");
  const auto it = std::upper_bound(upper_edges_.begin(), upper_edges_.end(), x);
  return static_cast<int>(it - upper_edges_.begin());
}

DiscreteOccupation::DiscreteOccupation(const CorridorPartition& partition, double kappa)
    : partition_(&partition), times_(partition.size(), 0.0), kappa_(kappa) {
  if (kappa < 0.0) throw std::invalid_argument("DiscreteOccupation: kappa must be >= 0");
}

void DiscreteOccupation::accumulate(double x, double t, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("accumulate: dt must be positive");
  const double weight = std::exp(kappa_ * t) * dt;
  times_[static_cast<std::size_t>(partition_->locate(x))] += weight;
  total_mass_ += weight;
}

double DiscreteOccupation::barycenter(Transform transform) const {
  if (!(total_mass_ > 0.0)) throw std::runtime_error("barycenter: zero occupation mass");
  const auto& nodes = partition_->nodes();
  double num = 0.0, den = 0.0;
  for (std::size_t m = 0; m < times_.size(); ++m) {
    const double f = (transform == Transform::Log) ? std::log(nodes[m]) : nodes[m];
    num += f * times_[m];
    den += times_[m];
  }
  return num / den;
}

double gamma_factor(double kappa, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("gamma_factor: t must be positive");
  if (kappa == 0.0) return 1.0 / t;
  return kappa / std::expm1(kappa * t);
}

double pair_against(std::span<const double> ell_values,
                    std::span<const double> occupation,
                    std::span<const double> projected) {
  if (ell_values.size() != occupation.size() || occupation.size() != projected.size()) {
    throw std::invalid_argument("pair_against: length mismatch");
  }
  double sum = 0.0;
  for (std::size_t m = 0; m < ell_values.size(); ++m) {
    sum += ell_values[m] * (occupation[m] - projected[m]);
  }
  return sum;
}

}  // namespace lov
