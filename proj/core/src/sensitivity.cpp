#include "lov/sensitivity.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "lov/rng.hpp"

namespace lov {

namespace {

double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

struct Mlp::Views {
  Eigen::Map<const Eigen::MatrixXd> w1, w2;
  Eigen::Map<const Eigen::VectorXd> b1, b2, w3;
  double b3;
  double shift_scale, shift_offset;
};

Mlp::Mlp(const Config& config) : config_(config) {
  if (config_.layers != std::vector<int>{3, 64, 64, 1}) {
    throw std::invalid_argument("Mlp: only the 3-64-64-1 architecture is supported");
  }
  int p = 0;
  for (std::size_t l = 0; l + 1 < config_.layers.size(); ++l) {
    p += config_.layers[l] * config_.layers[l + 1] + config_.layers[l + 1];
  }
  if (config_.affine_shift) p += 2;
  theta_ = Eigen::VectorXd::Zero(p);
  if (config_.affine_shift) {
    theta_[p - 2] = 1.0;  // identity shift: scale 1, offset 0
  }
  init_params();
}

Mlp::Views Mlp::views() const {
  const int h = 64;
  const double* d = theta_.data();
  Eigen::Map<const Eigen::MatrixXd> w1(d, h, 3);
  Eigen::Map<const Eigen::VectorXd> b1(d + 3 * h, h);
  Eigen::Map<const Eigen::MatrixXd> w2(d + 4 * h, h, h);
  Eigen::Map<const Eigen::VectorXd> b2(d + 4 * h + h * h, h);
  Eigen::Map<const Eigen::VectorXd> w3(d + 5 * h + h * h, h);
  const double b3 = d[6 * h + h * h];
  double scale = 1.0, offset = 0.0;
  if (config_.affine_shift) {
    scale = d[6 * h + h * h + 1];
    offset = d[6 * h + h * h + 2];
  }
  return Views{w1, w2, b1, b2, w3, b3, scale, offset};
}

void Mlp::set_theta(const Eigen::VectorXd& theta) {
  if (theta.size() != theta_.size()) throw std::invalid_argument("set_theta: size mismatch");
  theta_ = theta;
}

void Mlp::init_params() {
  // Glorot-uniform per layer, deterministic in config_.seed.
  std::uint64_t draw = 0;
  int offset = 0;
  for (std::size_t l = 0; l + 1 < config_.layers.size(); ++l) {
    const int fan_in = config_.layers[l], fan_out = config_.layers[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (int i = 0; i < fan_in * fan_out; ++i) {
      theta_[offset + i] = bound * (2.0 * rng::uniform01(config_.seed, draw++, 0) - 1.0);
    }
    offset += fan_in * fan_out;
    for (int i = 0; i < fan_out; ++i) theta_[offset + i] = 0.0;
    offset += fan_out;
  }
}

double Mlp::forward(double t, double x_spot, double x_node) const {
  Workspace ws;
  Eigen::MatrixXd in(1, 3);
  in << t, x_spot, x_node;
  forward_batch(in, ws);
  return ws.out[0];
}

void Mlp::forward_batch(const Eigen::MatrixXd& inputs, Workspace& ws) const {
  const auto v = views();
  const Eigen::Index B = inputs.rows();
  ws.in.resize(B, 3);
  ws.in.col(0) = inputs.col(0) / config_.t_ref;
  ws.in.col(1) = inputs.col(1) / config_.x0_ref;
  ws.in.col(2) = inputs.col(2) / config_.x0_ref;
  ws.a1.noalias() = ws.in * v.w1.transpose();
  ws.a1.rowwise() += v.b1.transpose();
  ws.a1 = ws.a1.cwiseMax(0.0);
  ws.a2.noalias() = ws.a1 * v.w2.transpose();
  ws.a2.rowwise() += v.b2.transpose();
  ws.a2 = ws.a2.cwiseMax(0.0);
  ws.z.noalias() = ws.a2 * v.w3;
  ws.z.array() += v.b3;
  ws.out.resize(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    ws.out[i] = v.shift_scale * softplus(ws.z[i]) + v.shift_offset;
  }
}

void Mlp::backward(const Workspace& ws, const Eigen::VectorXd& upstream,
                   Eigen::VectorXd& grad_theta, Eigen::MatrixXd* grad_inputs) const {
  const auto v = views();
  const int h = 64;
  if (grad_theta.size() != theta_.size()) {
    throw std::invalid_argument("backward: grad_theta size mismatch");
  }
  if (!upstream.allFinite()) throw std::invalid_argument("backward: non-finite upstream");
  const Eigen::Index B = ws.in.rows();

  Eigen::VectorXd dz(B);
  double g_scale = 0.0, g_offset = 0.0;
  for (Eigen::Index i = 0; i < B; ++i) {
    dz[i] = upstream[i] * v.shift_scale * sigmoid(ws.z[i]);
    if (config_.affine_shift) {
      g_scale += upstream[i] * softplus(ws.z[i]);
      g_offset += upstream[i];
    }
  }

  double* g = grad_theta.data();
  Eigen::Map<Eigen::MatrixXd> gw1(g, h, 3);
  Eigen::Map<Eigen::VectorXd> gb1(g + 3 * h, h);
  Eigen::Map<Eigen::MatrixXd> gw2(g + 4 * h, h, h);
  Eigen::Map<Eigen::VectorXd> gb2(g + 4 * h + h * h, h);
  Eigen::Map<Eigen::VectorXd> gw3(g + 5 * h + h * h, h);
  double& gb3 = g[6 * h + h * h];

  gw3.noalias() += ws.a2.transpose() * dz;
  gb3 += dz.sum();

  Eigen::MatrixXd d2 = dz * v.w3.transpose();          // B x h
  d2.array() *= (ws.a2.array() > 0.0).cast<double>();  // ramp derivative
  gw2.noalias() += d2.transpose() * ws.a1;
  gb2.noalias() += d2.colwise().sum().transpose();

  Eigen::MatrixXd d1 = d2 * v.w2;                      // B x h
  d1.array() *= (ws.a1.array() > 0.0).cast<double>();
  gw1.noalias() += d1.transpose() * ws.in;
  gb1.noalias() += d1.colwise().sum().transpose();

  if (config_.affine_shift) {
    g[6 * h + h * h + 1] += g_scale;
    g[6 * h + h * h + 2] += g_offset;
  }

  if (grad_inputs) {
    grad_inputs->noalias() = d1 * v.w1;  // B x 3, w.r.t. normalized inputs
    grad_inputs->col(0) /= config_.t_ref;
    grad_inputs->col(1) /= config_.x0_ref;
    grad_inputs->col(2) /= config_.x0_ref;
  }
}

void save_checkpoint(const std::string& path_prefix, const Mlp& mlp) {
  {
    std::ofstream out(path_prefix + ".theta.csv");
    if (!out) throw std::runtime_error("save_checkpoint: cannot open theta file");
    out.precision(17);
    for (Eigen::Index i = 0; i < mlp.theta().size(); ++i) out << mlp.theta()[i] << '\n';
  }
  nlohmann::json j;
  const auto& c = mlp.config();
  j["layer_sizes"] = c.layers;
  j["activations"] = {"ramp", "ramp", "smooth_positive"};
  j["normalization"] = {{"t_ref", c.t_ref}, {"x0_ref", c.x0_ref}};
  j["affine_shift"] = c.affine_shift;
  j["seed"] = c.seed;
  std::ofstream out(path_prefix + ".json");
  if (!out) throw std::runtime_error("save_checkpoint: cannot open sidecar");
  out << j.dump(2) << '\n';
}

Mlp load_checkpoint(const std::string& path_prefix) {
  std::ifstream meta(path_prefix + ".json");
  if (!meta) throw std::runtime_error("load_checkpoint: cannot open sidecar");
  nlohmann::json j;
  meta >> j;
  Mlp::Config c;
  c.layers = j.at("layer_sizes").get<std::vector<int>>();
  c.t_ref = j.at("normalization").at("t_ref").get<double>();
  c.x0_ref = j.at("normalization").at("x0_ref").get<double>();
  c.affine_shift = j.value("affine_shift", false);
  c.seed = j.value("seed", std::uint64_t{0});
  Mlp mlp(c);
  std::ifstream in(path_prefix + ".theta.csv");
  if (!in) throw std::runtime_error("load_checkpoint: cannot open theta file");
  Eigen::VectorXd theta(mlp.param_dim());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (!(in >> theta[i])) throw std::runtime_error("load_checkpoint: short theta file");
  }
  mlp.set_theta(theta);
  return mlp;
}

TanhSensitivity make_tanh_spec(const LocalVolSurface& surface, double t_max,
                               double alpha) {
  return TanhSensitivity{0.25 * surface.min_local_variance(t_max), alpha};
}

void validate_spec(const SensitivitySpec& spec, const LocalVolSurface* surface,
                   double t_max) {
  if (const auto* c = std::get_if<OneFactorCorridor>(&spec)) {
    if (c->multiplicative && !(std::fabs(c->beta) < 0.5)) {
      throw std::invalid_argument("OneFactorCorridor: |beta| must be < 1/2 in multiplicative mode");
    }
  } else if (const auto* th = std::get_if<TanhSensitivity>(&spec)) {
    if (surface && t_max > 0.0) {
      const double cap = 0.25 * surface->min_local_variance(t_max);
      if (th->scale > cap + 1e-15) {
        throw std::invalid_argument("TanhSensitivity: scale exceeds a quarter of the minimum local variance");
      }
    }
  }
}

double eval(const SensitivitySpec& spec, double t, double x_spot, double x_node,
            const CorridorPartition& partition) {
  struct Visitor {
    double t, x_spot, x_node;
    const CorridorPartition& partition;
    double operator()(const ZeroSensitivity&) const { return 0.0; }
    double operator()(const OneFactorCorridor& s) const {
      const int m = partition.locate(x_node);
      for (int a : s.corridors) {
        if (a == m) return s.beta;
      }
      return 0.0;
    }
    double operator()(const TanhSensitivity& s) const {
      return s.scale * std::tanh(s.alpha * x_node / x_spot);
    }
    double operator()(const EmaLogSensitivity& s) const { return s.beta * std::log(x_node); }
    double operator()(const NeuralSensitivity& s) const {
      return s.net->forward(t, x_spot, x_node);
    }
  };
  return std::visit(Visitor{t, x_spot, x_node, partition}, spec);
}

Eigen::MatrixXd eval_batch(const SensitivitySpec& spec, double t,
                           const Eigen::VectorXd& x_batch,
                           const CorridorPartition& partition) {
  const Eigen::Index J = x_batch.size();
  const Eigen::Index M = partition.size();
  Eigen::MatrixXd out(J, M);
  if (const auto* n = std::get_if<NeuralSensitivity>(&spec)) {
    Eigen::MatrixXd in(J * M, 3);
    for (Eigen::Index j = 0; j < J; ++j) {
      for (Eigen::Index m = 0; m < M; ++m) {
        in(j * M + m, 0) = t;
        in(j * M + m, 1) = x_batch[j];
        in(j * M + m, 2) = partition.nodes()[m];
      }
    }
    Mlp::Workspace ws;
    n->net->forward_batch(in, ws);
    for (Eigen::Index j = 0; j < J; ++j) {
      out.row(j) = ws.out.segment(j * M, M).transpose();
    }
    return out;
  }
  for (Eigen::Index j = 0; j < J; ++j) {
    for (Eigen::Index m = 0; m < M; ++m) {
      out(j, m) = eval(spec, t, x_batch[j], partition.nodes()[m], partition);
    }
  }
  return out;
}

void adam_step(AdamState& state, Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
  if (theta.size() != grad.size() || theta.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: size mismatch");
  }
  state.step += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v.array().matrix() +
            (1.0 - state.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  theta.array() -= state.learning_rate * (state.m.array() / bc1) /
                   ((state.v.array() / bc2).sqrt() + state.epsilon);
}

}  // namespace lov
