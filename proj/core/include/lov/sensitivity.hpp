#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "lov/occupation.hpp"
#include "lov/surface.hpp"

namespace lov {

/// Feedforward network 3 -> 64 -> 64 -> 1 with ramp (ReLU) hidden layers and a
/// smooth-positive (softplus) output, evaluated on normalized inputs
/// (t/T_ref, X/x0_ref, x/x0_ref). An optional learnable affine output shift
/// (scale, offset) allows sign changes; off by default.
class Mlp {
 public:
  struct Config {
    std::vector<int> layers{3, 64, 64, 1};
    double t_ref = 1.0;    ///< time normalization
    double x0_ref = 1.0;   ///< price normalization
    bool affine_shift = false;
    std::uint64_t seed = 0;
  };

  explicit Mlp(const Config& config);

  int param_dim() const { return static_cast<int>(theta_.size()); }
  const Eigen::VectorXd& theta() const { return theta_; }
  void set_theta(const Eigen::VectorXd& theta);
  const Config& config() const { return config_; }

  /// Glorot-uniform initialization keyed by config.seed (deterministic).
  void init_params();

  double forward(double t, double x_spot, double x_node) const;

  /// Scratch buffers reused across batched calls.
  struct Workspace {
    Eigen::MatrixXd in, a1, a2;
    Eigen::VectorXd z, out;
  };

  /// Batched forward pass. `inputs` is B x 3 (raw, un-normalized).
  void forward_batch(const Eigen::MatrixXd& inputs, Workspace& ws) const;

  /// Reverse pass for the batch last run through `ws`. Accumulates the
  /// parameter gradient into `grad_theta` (size param_dim) and, when
  /// `grad_inputs` is non-null, writes d(out)/d(inputs) contracted with
  /// `upstream` as a B x 3 matrix (overwritten).
  void backward(const Workspace& ws, const Eigen::VectorXd& upstream,
                Eigen::VectorXd& grad_theta, Eigen::MatrixXd* grad_inputs = nullptr) const;

 private:
  Config config_;
  Eigen::VectorXd theta_;

  struct Views;
  Views views() const;
  friend struct MlpIO;
};

/// Save/load theta as a flat CSV with a JSON sidecar describing the
/// architecture; the round trip is exact.
void save_checkpoint(const std::string& path_prefix, const Mlp& mlp);
Mlp load_checkpoint(const std::string& path_prefix);

// --- sensitivity function variants -----------------------------------------

struct ZeroSensitivity {};

/// ell(t,X,x) = beta 1_A(x) over a set of corridor indices. With
/// `multiplicative` set the bound |beta| < 1/2 is enforced.
struct OneFactorCorridor {
  double beta = 0.0;
  std::vector<int> corridors;
  bool multiplicative = false;
};

/// ell(t,X,x) = scale * tanh(alpha x / X); scale is in variance units and
/// must not exceed a quarter of the minimum local variance for the
/// positivity bound to hold.
struct TanhSensitivity {
  double scale = 0.0;
  double alpha = 1.0;
};

/// ell(t,X,x) = beta log x (EMA form of the correction term).
struct EmaLogSensitivity {
  double beta = 0.0;
};

struct NeuralSensitivity {
  std::shared_ptr<Mlp> net;
};

using SensitivitySpec = std::variant<ZeroSensitivity, OneFactorCorridor,
                                     TanhSensitivity, EmaLogSensitivity,
                                     NeuralSensitivity>;

/// Tanh spec at the positivity-safe scale 0.25 * min local variance.
TanhSensitivity make_tanh_spec(const LocalVolSurface& surface, double t_max,
                               double alpha);

/// Validates variant-specific invariants (corridor bound, tanh scale against
/// a surface when supplied). Throws on violation.
void validate_spec(const SensitivitySpec& spec, const LocalVolSurface* surface = nullptr,
                   double t_max = 0.0);

double eval(const SensitivitySpec& spec, double t, double x_spot, double x_node,
            const CorridorPartition& partition);

/// Entry (j,m) = eval(spec, t, x_batch[j], nodes[m]). Neural specs run one
/// batched forward pass over all J*M inputs.
Eigen::MatrixXd eval_batch(const SensitivitySpec& spec, double t,
                           const Eigen::VectorXd& x_batch,
                           const CorridorPartition& partition);

// --- Adam ------------------------------------------------------------------

struct AdamState {
  Eigen::VectorXd m, v;
  long step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(int dim, double lr = 1e-3)
      : m(Eigen::VectorXd::Zero(dim)), v(Eigen::VectorXd::Zero(dim)), learning_rate(lr) {}
};

/// Standard Adam update with bias correction; mutates state and theta.
void adam_step(AdamState& state, Eigen::VectorXd& theta, const Eigen::VectorXd& grad);

}  // namespace lov
