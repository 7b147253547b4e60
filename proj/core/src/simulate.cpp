#include "lov/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lov/rng.hpp"

namespace lov {

namespace {

// Fills ell[j*M+m] = ell(t, x[j], node[m]); reuses buffers across steps.
class BatchEllEvaluator {
 public:
  BatchEllEvaluator(const SensitivitySpec& spec, const CorridorPartition& partition)
      : spec_(&spec), partition_(&partition) {}

  void evaluate(double t, const Eigen::VectorXd& x, std::vector<double>& ell) {
    const Eigen::Index J = x.size();
    const Eigen::Index M = partition_->size();
    ell.resize(static_cast<std::size_t>(J * M));
    if (const auto* n = std::get_if<NeuralSensitivity>(spec_)) {
      in_.resize(J * M, 3);
      const auto& nodes = partition_->nodes();
      for (Eigen::Index j = 0; j < J; ++j) {
        for (Eigen::Index m = 0; m < M; ++m) {
          in_(j * M + m, 0) = t;
          in_(j * M + m, 1) = x[j];
          in_(j * M + m, 2) = nodes[m];
        }
      }
      n->net->forward_batch(in_, ws_);
      std::copy(ws_.out.data(), ws_.out.data() + J * M, ell.begin());
      return;
    }
    const auto& nodes = partition_->nodes();
    for (Eigen::Index j = 0; j < J; ++j) {
      for (Eigen::Index m = 0; m < M; ++m) {
        ell[static_cast<std::size_t>(j * M + m)] =
            eval(*spec_, t, x[j], nodes[m], *partition_);
      }
    }
  }

 private:
  const SensitivitySpec* spec_;
  const CorridorPartition* partition_;
  Eigen::MatrixXd in_;
  Mlp::Workspace ws_;
};

void fill_normals(std::uint64_t seed, int J, std::uint32_t step, Eigen::VectorXd& z) {
  const int half = J / 2;
  for (int j = 0; j < half; ++j) {
    const double v = rng::normal(seed, static_cast<std::uint64_t>(j), step);
    z[j] = v;
    z[j + half] = -v;
  }
}

}  // namespace

double quartic_kernel(double delta, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("quartic_kernel: h must be positive");
  const double u = delta / h;
  if (std::fabs(u) >= 1.0) return 0.0;
  const double c = 1.0 - u * u;
  return 0.9375 * c * c / h;  // 15/16
}

double bandwidth(const Eigen::VectorXd& x, double mult) {
  const Eigen::Index J = x.size();
  if (J < 2) throw std::invalid_argument("bandwidth: need at least two particles");
  const double mean = x.mean();
  const double var = (x.array() - mean).square().sum() / static_cast<double>(J - 1);
  const double sd = std::sqrt(std::max(var, 0.0));
  const double h = mult * sd * std::pow(static_cast<double>(J), -0.2);
  return std::max(h, 1e-8 * std::fabs(mean));
}

ProjectionEstimate project_occupation(const std::vector<double>& occupation, int J,
                                      int M, const Eigen::VectorXd& x_now, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("project_occupation: h must be positive");
  if (static_cast<int>(occupation.size()) != J * M || x_now.size() != J) {
    throw std::invalid_argument("project_occupation: size mismatch");
  }
  ProjectionEstimate est;
  est.h = h;
  est.projected.assign(static_cast<std::size_t>(J) * M, 0.0);

  // Sort particles by spot (stable tie-break on index) and sweep a
  // (x - h, x + h) window with two pointers. The quartic kernel is a degree-4
  // polynomial in the particle position, so the window sums reduce to five
  // running moment vectors sum_j' b^k O_m(j'), b = (x_j' - center)/h. The
  // moments are updated incrementally as the window slides and rebuilt from
  // scratch whenever the query drifts more than h from the expansion center,
  // which keeps |b| small and the cancellation error near machine precision.
  std::vector<int> order(static_cast<std::size_t>(J));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (x_now[a] != x_now[b]) return x_now[a] < x_now[b];
    return a < b;
  });
  std::vector<double> xs(static_cast<std::size_t>(J));
  for (int pos = 0; pos < J; ++pos) xs[static_cast<std::size_t>(pos)] = x_now[order[pos]];

  const double inv_h = 1.0 / h;
  std::vector<double> moments(5 * static_cast<std::size_t>(M), 0.0);
  double U[5] = {0, 0, 0, 0, 0};
  double center = 0.0;
  bool centered = false;

  auto accumulate = [&](int pos, double sign) {
    const double b = (xs[static_cast<std::size_t>(pos)] - center) * inv_h;
    const double* row =
        occupation.data() + static_cast<std::size_t>(order[pos]) * M;
    double bk = sign;
    for (int k = 0; k < 5; ++k) {
      U[k] += bk;
      double* S = moments.data() + static_cast<std::size_t>(k) * M;
      for (int m = 0; m < M; ++m) S[m] += bk * row[m];
      bk *= b;
    }
  };

  int lo = 0, hi = 0;
  for (int pos = 0; pos < J; ++pos) {
    const double xj = xs[static_cast<std::size_t>(pos)];
    int new_lo = lo, new_hi = hi;
    while (new_lo < J && xs[static_cast<std::size_t>(new_lo)] <= xj - h) ++new_lo;
    while (new_hi < J && xs[static_cast<std::size_t>(new_hi)] < xj + h) ++new_hi;

    if (!centered || std::fabs(xj - center) > h) {
      centered = true;
      center = xj;
      lo = new_lo;
      hi = new_hi;
      std::fill(moments.begin(), moments.end(), 0.0);
      std::fill(U, U + 5, 0.0);
      for (int q = lo; q < hi; ++q) accumulate(q, 1.0);
    } else {
      for (int q = lo; q < new_lo; ++q) accumulate(q, -1.0);
      for (int q = hi; q < new_hi; ++q) accumulate(q, 1.0);
      lo = new_lo;
      hi = new_hi;
    }

    // psi(x_j - x') = 15/(16h) (1 - (a - b)^2)^2 expanded in b; the common
    // 15/(16h) factor cancels in the Nadaraya-Watson ratio.
    const double a = (xj - center) * inv_h;
    const double P = 1.0 - a * a;
    const double c0 = P * P, c1 = 4.0 * a * P, c2 = 4.0 * a * a - 2.0 * P,
                 c3 = -4.0 * a, c4 = 1.0;
    const double wsum = c0 * U[0] + c1 * U[1] + c2 * U[2] + c3 * U[3] + c4 * U[4];

    double* out = est.projected.data() + static_cast<std::size_t>(order[pos]) * M;
    if (wsum > 0.0) {
      const double inv = 1.0 / wsum;
      const double* S0 = moments.data();
      const double* S1 = S0 + M;
      const double* S2 = S1 + M;
      const double* S3 = S2 + M;
      const double* S4 = S3 + M;
      for (int m = 0; m < M; ++m) {
        out[m] = (c0 * S0[m] + c1 * S1[m] + c2 * S2[m] + c3 * S3[m] + c4 * S4[m]) * inv;
      }
    } else {
      // degenerate fallback: keep the path's own occupation
      const double* row = occupation.data() + static_cast<std::size_t>(order[pos]) * M;
      std::copy(row, row + M, out);
    }
  }
  return est;
}

std::vector<int> band_bounds(int M) {
  std::vector<int> bounds(6);
  for (int b = 0; b <= 5; ++b) bounds[b] = (b * M) / 5;
  return bounds;
}

PathEnsemble simulate_lov(const SimConfig& config, const MarketEnvironment& env,
                          const LovModel& model, GradientTape* tape) {
  const int J = config.J, N = config.N, M = model.partition.size();
  if (J < 2 || J % 2 != 0) throw std::invalid_argument("simulate_lov: J must be even and >= 2");
  if (N < 1) throw std::invalid_argument("simulate_lov: N must be >= 1");
  const double dt = config.T / N;
  const double sqrt_dt = std::sqrt(dt);
  const double carry = env.rate - env.dividend_yield;
  const bool zero_spec = std::holds_alternative<ZeroSensitivity>(model.spec);

  PathEnsemble ens;
  ens.J = J; ens.N = N; ens.M = M;
  ens.T = config.T; ens.dt = dt; ens.kappa = model.kappa;
  ens.x0 = env.spot; ens.rate = env.rate; ens.div_yield = env.dividend_yield;
  ens.seed = config.seed;
  ens.X.resize(J, N + 1);
  ens.sigma.resize(J, N);
  ens.occupation.assign(static_cast<std::size_t>(J) * M, 0.0);
  if (config.record_bands) {
    ens.band_occ.assign(static_cast<std::size_t>(N) * J * 5, 0.0);
  }
  if (tape) {
    tape->J = J; tape->N = N; tape->M = M;
    tape->diff.assign(static_cast<std::size_t>(N) * J * M, 0.0f);
    tape->corridor.assign(static_cast<std::size_t>(N) * J, 0);
    tape->clamped.assign(static_cast<std::size_t>(N) * J, 0);
    tape->gamma.assign(static_cast<std::size_t>(N), 0.0);
    tape->local_var.assign(static_cast<std::size_t>(N) * J, 0.0);
  }

  std::vector<double> log_x(static_cast<std::size_t>(J), std::log(env.spot));
  ens.X.col(0).setConstant(env.spot);

  auto& occ = ens.occupation;
  std::vector<double> ell;
  ProjectionEstimate proj;
  BatchEllEvaluator ell_eval(model.spec, model.partition);
  Eigen::VectorXd z(J), x_col(J);
  const auto bounds = band_bounds(M);
  double mass = 0.0;

  for (int n = 0; n < N; ++n) {
    const double t = n * dt;
    x_col = ens.X.col(n);
    fill_normals(config.seed, J, static_cast<std::uint32_t>(n), z);

    const bool corrected = !zero_spec && mass > 0.0 && !model.uncentered;
    const bool needs_ell = !zero_spec && mass > 0.0;
    if (corrected) {
      const double h = bandwidth(x_col, config.bandwidth_mult);
      proj = project_occupation(occ, J, M, x_col, h);
      // projection conserves the (common) row mass; track the residual
      for (int j = 0; j < J; ++j) {
        double rowsum = 0.0;
        const double* row = proj.projected.data() + static_cast<std::size_t>(j) * M;
        for (int m = 0; m < M; ++m) rowsum += row[m];
        ens.mass_residual = std::max(ens.mass_residual, std::fabs(rowsum - mass));
      }
    }
    if (needs_ell) ell_eval.evaluate(t, x_col, ell);
    const double gamma = (mass > 0.0) ? 1.0 / mass : 0.0;
    if (tape) tape->gamma[static_cast<std::size_t>(n)] = gamma;

    for (int j = 0; j < J; ++j) {
      const double xj = x_col[j];
      const int cj = model.partition.locate(xj);
      const double s_loc = model.surface->at(t, xj);
      const double local_var = s_loc * s_loc;
      double var = local_var;
      bool clamp_hit = false;
      if (needs_ell) {
        const double* ell_row = ell.data() + static_cast<std::size_t>(j) * M;
        const double* occ_row = occ.data() + static_cast<std::size_t>(j) * M;
        double pairing = 0.0;
        if (model.uncentered) {
          for (int m = 0; m < M; ++m) pairing += ell_row[m] * occ_row[m];
        } else {
          const double* proj_row = proj.projected.data() + static_cast<std::size_t>(j) * M;
          const double center = ell_row[cj];
          for (int m = 0; m < M; ++m) {
            pairing += (ell_row[m] - center) * (occ_row[m] - proj_row[m]);
          }
          if (tape) {
            float* d = tape->diff.data() + (static_cast<std::size_t>(n) * J + j) * M;
            for (int m = 0; m < M; ++m) {
              d[m] = static_cast<float>(occ_row[m] - proj_row[m]);
            }
          }
        }
        const double correction = gamma * pairing;
        var = (model.mode == CorrectionMode::Additive) ? local_var + correction
                                                       : local_var * (1.0 + correction);
      }
      if (var < model.var_floor || var > model.var_cap) {
        ++ens.clamp_events;
        clamp_hit = true;
        var = std::clamp(var, model.var_floor, model.var_cap);
      }
      const double sig = std::sqrt(var);
      ens.sigma(j, n) = sig;
      log_x[j] += sig * sqrt_dt * z[j] + (carry - 0.5 * var) * dt;
      const double x_next = std::exp(log_x[j]);
      if (!std::isfinite(x_next) || !std::isfinite(var)) {
        throw std::runtime_error("simulate_lov: non-finite state at step " +
                                 std::to_string(n) + ", path " + std::to_string(j));
      }
      ens.X(j, n + 1) = x_next;
      if (tape) {
        tape->corridor[static_cast<std::size_t>(n) * J + j] = static_cast<std::uint16_t>(cj);
        tape->clamped[static_cast<std::size_t>(n) * J + j] = clamp_hit ? 1 : 0;
        tape->local_var[static_cast<std::size_t>(n) * J + j] = local_var;
      }
      // occupation accrues at X_{t_n}
      occ[static_cast<std::size_t>(j) * M + cj] += std::exp(model.kappa * t) * dt;
    }
    mass += std::exp(model.kappa * t) * dt;

    if (config.record_bands) {
      // state after this step is O_{t_{n+1}}
      for (int j = 0; j < J; ++j) {
        const double* row = occ.data() + static_cast<std::size_t>(j) * M;
        double* out = ens.band_occ.data() + (static_cast<std::size_t>(n) * J + j) * 5;
        for (int b = 0; b < 5; ++b) {
          double s = 0.0;
          for (int m = bounds[b]; m < bounds[b + 1]; ++m) s += row[m];
          out[b] = s;
        }
      }
    }
  }
  ens.total_mass = mass;
  return ens;
}

PathEnsemble simulate_lov(const SimConfig& config, const MarketEnvironment& env,
                          const LocalVolSurface& surface, const SensitivitySpec& spec,
                          CorrectionMode mode) {
  LovModel model{&surface,
                 CorridorPartition::build(env.spot, config.sigma_ref, config.T, config.M),
                 spec,
                 mode,
                 config.kappa,
                 config.var_floor,
                 config.var_cap,
                 false};
  return simulate_lov(config, env, model, nullptr);
}

PathEnsemble simulate_guyon_toy(const SimConfig& config, const MarketEnvironment& env,
                                double alpha, double beta, double gamma_toy) {
  if (!(alpha > 0.0 && beta > 0.0 && gamma_toy > 0.0)) {
    throw std::invalid_argument("simulate_guyon_toy: parameters must be positive");
  }
  const int J = config.J, N = config.N, M = config.M;
  if (J < 2 || J % 2 != 0) throw std::invalid_argument("simulate_guyon_toy: J must be even");
  const double dt = config.T / N;
  const double sqrt_dt = std::sqrt(dt);
  const double carry = env.rate - env.dividend_yield;
  const double sig_floor = std::sqrt(config.var_floor);
  const double sig_cap = std::sqrt(config.var_cap);

  CorridorPartition partition =
      CorridorPartition::build(env.spot, config.sigma_ref, config.T, M);

  PathEnsemble ens;
  ens.J = J; ens.N = N; ens.M = M;
  ens.T = config.T; ens.dt = dt; ens.kappa = config.kappa;
  ens.x0 = env.spot; ens.rate = env.rate; ens.div_yield = env.dividend_yield;
  ens.seed = config.seed;
  ens.X.resize(J, N + 1);
  ens.sigma.resize(J, N);
  ens.occupation.assign(static_cast<std::size_t>(J) * M, 0.0);
  ens.X.col(0).setConstant(env.spot);

  std::vector<double> log_x(static_cast<std::size_t>(J), std::log(env.spot));
  Eigen::VectorXd z(J);
  const auto& nodes = partition.nodes();
  double mass = 0.0;

  for (int n = 0; n < N; ++n) {
    const double t = n * dt;
    fill_normals(config.seed, J, static_cast<std::uint32_t>(n), z);
    for (int j = 0; j < J; ++j) {
      const double xj = ens.X(j, n);
      double trend = 1.0;  // empty-measure convention
      if (mass > 0.0) {
        const double* row = ens.occupation.data() + static_cast<std::size_t>(j) * M;
        double num = 0.0, den = 0.0;
        for (int m = 0; m < M; ++m) {
          num += nodes[m] * row[m];
          den += row[m];
        }
        trend = xj / (num / den);
      }
      double sig = -alpha / beta + gamma_toy * std::pow(trend, -beta);
      sig = std::clamp(sig, sig_floor, sig_cap);
      ens.sigma(j, n) = sig;
      log_x[j] += sig * sqrt_dt * z[j] + (carry - 0.5 * sig * sig) * dt;
      const double x_next = std::exp(log_x[j]);
      if (!std::isfinite(x_next)) {
        throw std::runtime_error("simulate_guyon_toy: non-finite state at step " +
                                 std::to_string(n) + ", path " + std::to_string(j));
      }
      ens.X(j, n + 1) = x_next;
      ens.occupation[static_cast<std::size_t>(j) * M + partition.locate(xj)] +=
          std::exp(config.kappa * t) * dt;
    }
    mass += std::exp(config.kappa * t) * dt;
  }
  ens.total_mass = mass;
  return ens;
}

}  // namespace lov
