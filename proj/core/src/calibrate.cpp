#include "lov/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "lov/rng.hpp"

namespace lov {

namespace {

void require_weights(const std::vector<OptionQuote>& quotes) {
  if (quotes.empty()) throw std::invalid_argument("calibration: empty instrument set");
  for (const auto& q : quotes) {
    if (!(q.weight > 0.0)) {
      throw std::invalid_argument(
          "calibration: instrument without a weight (run calibration_weights first)");
    }
  }
}

/// Deep copy of a spec; Neural variants share the network behind a
/// shared_ptr, so bumping parameters on a shallow copy would leak through.
SensitivitySpec clone_spec(const SensitivitySpec& spec) {
  if (const auto* n = std::get_if<NeuralSensitivity>(&spec)) {
    auto copy = std::make_shared<Mlp>(n->net->config());
    copy->set_theta(n->net->theta());
    return NeuralSensitivity{std::move(copy)};
  }
  return spec;
}

void write_theta_csv(const std::string& path, const Eigen::VectorXd& theta) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  for (Eigen::Index i = 0; i < theta.size(); ++i) out << theta[i] << "\n";
}

}  // namespace

double calibration_loss(std::span<const double> prices,
                        const std::vector<OptionQuote>& quotes) {
  if (prices.size() != quotes.size()) {
    throw std::invalid_argument("calibration_loss: price/quote count mismatch");
  }
  require_weights(quotes);
  double acc = 0.0;
  for (std::size_t i = 0; i < quotes.size(); ++i) {
    const double e = quotes[i].weight * (prices[i] - quotes[i].mid);
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(quotes.size()));
}

double threshold_alpha(const std::vector<OptionQuote>& quotes) {
  require_weights(quotes);
  double acc = 0.0;
  for (const auto& q : quotes) {
    const double e = q.weight * (q.ask - q.bid);
    acc += e * e;
  }
  return 0.5 * std::sqrt(acc / static_cast<double>(quotes.size()));
}

int spec_param_dim(const SensitivitySpec& spec) {
  if (std::holds_alternative<ZeroSensitivity>(spec)) return 0;
  if (std::holds_alternative<OneFactorCorridor>(spec)) return 1;
  if (std::holds_alternative<TanhSensitivity>(spec)) return 2;
  if (std::holds_alternative<EmaLogSensitivity>(spec)) return 1;
  return std::get<NeuralSensitivity>(spec).net->param_dim();
}

Eigen::VectorXd spec_get_theta(const SensitivitySpec& spec) {
  if (const auto* o = std::get_if<OneFactorCorridor>(&spec)) {
    return Eigen::VectorXd::Constant(1, o->beta);
  }
  if (const auto* t = std::get_if<TanhSensitivity>(&spec)) {
    Eigen::VectorXd v(2);
    v << t->scale, t->alpha;
    return v;
  }
  if (const auto* e = std::get_if<EmaLogSensitivity>(&spec)) {
    return Eigen::VectorXd::Constant(1, e->beta);
  }
  if (const auto* n = std::get_if<NeuralSensitivity>(&spec)) return n->net->theta();
  return Eigen::VectorXd();  // ZeroSensitivity
}

void spec_set_theta(SensitivitySpec& spec, const Eigen::VectorXd& theta) {
  if (theta.size() != spec_param_dim(spec)) {
    throw std::invalid_argument("spec_set_theta: dimension mismatch");
  }
  if (auto* o = std::get_if<OneFactorCorridor>(&spec)) {
    o->beta = theta[0];
  } else if (auto* t = std::get_if<TanhSensitivity>(&spec)) {
    t->scale = theta[0];
    t->alpha = theta[1];
  } else if (auto* e = std::get_if<EmaLogSensitivity>(&spec)) {
    e->beta = theta[0];
  } else if (auto* n = std::get_if<NeuralSensitivity>(&spec)) {
    n->net->set_theta(theta);
  }
}

PricedBatch price_batch(const LovModel& model, const SimConfig& sim,
                        const MarketEnvironment& env,
                        const std::vector<OptionQuote>& instruments,
                        bool european_payoff, GradientTape* tape) {
  SimConfig cfg = sim;
  if (!european_payoff) {
    for (const auto& q : instruments) {
      if (q.exercise == Exercise::American) cfg.record_bands = true;
    }
  }
  PricedBatch batch;
  batch.ensemble = simulate_lov(cfg, env, model, tape);
  const PathEnsemble& ens = batch.ensemble;
  batch.prices.reserve(instruments.size());
  batch.stops.reserve(instruments.size());

  for (const auto& q : instruments) {
    std::vector<int> stops(static_cast<std::size_t>(ens.J), -1);
    if (!european_payoff && q.exercise == Exercise::American) {
      if (q.payoff_flag != -1) {
        throw std::invalid_argument("price_batch: American pricing supports puts only");
      }
      AmericanPricing ap =
          price_american_put(ens, q.strike, q.expiry, env.rate, all_steps_to(ens, q.expiry));
      batch.prices.push_back(ap.price);
      stops = std::move(ap.stop_step);
    } else {
      EuropeanPricing ep = price_european(ens, q.strike, q.expiry, env.rate, q.payoff_flag);
      batch.prices.push_back(ep.price);
      const int nT = static_cast<int>(std::lround(q.expiry / ens.dt));
      for (int j = 0; j < ens.J; ++j) {
        if (q.payoff_flag * (ens.X(j, nT) - q.strike) > 0.0) {
          stops[static_cast<std::size_t>(j)] = nT;
        }
      }
    }
    batch.stops.push_back(std::move(stops));
  }
  return batch;
}

namespace {

/// Contracts the per-corridor upstream sensitivities into the parameter
/// gradient and per-path spot gradient at one time step.
/// upstream(j,m) multiplies d ell(t, X_j, x_m) / d {theta, X_j}.
void backprop_spec(const SensitivitySpec& spec, const CorridorPartition& partition,
                   double t, const Eigen::VectorXd& x_col,
                   const Eigen::MatrixXd& upstream, Eigen::VectorXd& grad_theta,
                   Eigen::VectorXd& grad_x, Mlp::Workspace& ws,
                   Eigen::MatrixXd& net_inputs, Eigen::MatrixXd& net_grad_in) {
  const int J = static_cast<int>(x_col.size());
  const int M = partition.size();
  const auto& nodes = partition.nodes();
  grad_x.setZero(J);

  if (const auto* nn = std::get_if<NeuralSensitivity>(&spec)) {
    net_inputs.resize(static_cast<Eigen::Index>(J) * M, 3);
    for (int j = 0; j < J; ++j) {
      for (int m = 0; m < M; ++m) {
        const Eigen::Index r = static_cast<Eigen::Index>(j) * M + m;
        net_inputs(r, 0) = t;
        net_inputs(r, 1) = x_col[j];
        net_inputs(r, 2) = nodes[static_cast<std::size_t>(m)];
      }
    }
    nn->net->forward_batch(net_inputs, ws);
    Eigen::VectorXd u(static_cast<Eigen::Index>(J) * M);
    for (int j = 0; j < J; ++j) {
      for (int m = 0; m < M; ++m) u[static_cast<Eigen::Index>(j) * M + m] = upstream(j, m);
    }
    nn->net->backward(ws, u, grad_theta, &net_grad_in);
    for (int j = 0; j < J; ++j) {
      double g = 0.0;
      for (int m = 0; m < M; ++m) g += net_grad_in(static_cast<Eigen::Index>(j) * M + m, 1);
      grad_x[j] = g;
    }
    return;
  }
  if (const auto* e = std::get_if<EmaLogSensitivity>(&spec)) {
    (void)e;
    double g = 0.0;
    for (int j = 0; j < J; ++j) {
      for (int m = 0; m < M; ++m) {
        g += upstream(j, m) * std::log(nodes[static_cast<std::size_t>(m)]);
      }
    }
    grad_theta[0] += g;
    return;
  }
  if (const auto* th = std::get_if<TanhSensitivity>(&spec)) {
    for (int j = 0; j < J; ++j) {
      const double xj = x_col[j];
      for (int m = 0; m < M; ++m) {
        const double u = upstream(j, m);
        if (u == 0.0) continue;
        const double ratio = nodes[static_cast<std::size_t>(m)] / xj;
        const double tv = std::tanh(th->alpha * ratio);
        const double sech2 = 1.0 - tv * tv;
        grad_theta[0] += u * tv;
        grad_theta[1] += u * th->scale * sech2 * ratio;
        grad_x[j] += u * th->scale * sech2 * (-th->alpha * ratio / xj);
      }
    }
    return;
  }
  if (const auto* of = std::get_if<OneFactorCorridor>(&spec)) {
    double g = 0.0;
    for (int m : of->corridors) {
      if (m < 0 || m >= M) continue;
      for (int j = 0; j < J; ++j) g += upstream(j, m);
    }
    grad_theta[0] += g;
    return;
  }
  // ZeroSensitivity: nothing to do
}

void fill_normals_like_sim(std::uint64_t seed, int J, std::uint32_t step,
                           Eigen::VectorXd& z) {
  const int half = J / 2;
  for (int j = 0; j < half; ++j) {
    const double v = rng::normal(seed, static_cast<std::uint64_t>(j), step);
    z[j] = v;
    z[j + half] = -v;
  }
}

}  // namespace

LossAndGradient pathwise_loss_gradient(const LovModel& model, const SimConfig& sim,
                                       const MarketEnvironment& env,
                                       const std::vector<OptionQuote>& instruments,
                                       bool european_payoff) {
  if (model.uncentered) {
    throw std::invalid_argument("pathwise_loss_gradient: uncentered mode unsupported");
  }
  const int P = spec_param_dim(model.spec);
  if (P == 0) {
    throw std::invalid_argument("pathwise_loss_gradient: spec has no parameters");
  }
  require_weights(instruments);

  GradientTape tape;
  PricedBatch batch = price_batch(model, sim, env, instruments, european_payoff, &tape);
  const PathEnsemble& ens = batch.ensemble;
  const int J = ens.J, N = ens.N, M = ens.M;
  const double dt = ens.dt, sqrt_dt = std::sqrt(dt);
  const std::size_t I = instruments.size();

  LossAndGradient out;
  out.prices = batch.prices;
  out.loss = calibration_loss(batch.prices, instruments);
  out.grad = Eigen::VectorXd::Zero(P);
  if (out.loss == 0.0) return out;

  // dL/dp_i for the weighted RMSE
  std::vector<double> dLdp(I);
  for (std::size_t i = 0; i < I; ++i) {
    const double w = instruments[i].weight;
    dLdp[i] = w * w * (batch.prices[i] - instruments[i].mid) /
              (static_cast<double>(I) * out.loss);
  }

  // Payoff seeds: each instrument contributes at its (frozen) stopping step
  //   d v_j / d X_stop = flag * e^{-r t_stop}, d p_i / d v_j = 1/J.
  Eigen::MatrixXd hit = Eigen::MatrixXd::Zero(J, N + 1);
  for (std::size_t i = 0; i < I; ++i) {
    const double eta = instruments[i].payoff_flag;
    const double scale = dLdp[i] / static_cast<double>(J);
    for (int j = 0; j < J; ++j) {
      const int stop = batch.stops[i][static_cast<std::size_t>(j)];
      if (stop >= 0) hit(j, stop) += scale * eta * std::exp(-env.rate * stop * dt);
    }
  }

  const bool additive = model.mode == CorrectionMode::Additive;
  const bool has_corr = !std::holds_alternative<ZeroSensitivity>(model.spec);

  Eigen::VectorXd a = hit.col(N);
  Eigen::VectorXd a_next(J), z(J), x_col(J), asig(J), gx(J);
  Eigen::MatrixXd upstream(J, M), net_inputs, net_grad_in;
  Mlp::Workspace ws;

  for (int n = N - 1; n >= 0; --n) {
    const double t = n * dt;
    x_col = ens.X.col(n);
    fill_normals_like_sim(ens.seed, J, static_cast<std::uint32_t>(n), z);

    // adjoint of the step variance through the log-Euler update
    for (int j = 0; j < J; ++j) {
      if (tape.clamped[static_cast<std::size_t>(n) * J + j]) {
        asig[j] = 0.0;
        continue;
      }
      const double sig = ens.sigma(j, n);
      asig[j] = a[j] * ens.X(j, n + 1) * (sqrt_dt * z[j] / (2.0 * sig) - 0.5 * dt);
    }

    const double gamma = tape.gamma[static_cast<std::size_t>(n)];
    gx.setZero();
    if (has_corr && gamma > 0.0) {
      // upstream(j,m) = d(step variance)/d ell(t, X_j, x_m) * asig_j
      for (int j = 0; j < J; ++j) {
        const float* d = tape.diff.data() + (static_cast<std::size_t>(n) * J + j) * M;
        double total = 0.0;
        for (int m = 0; m < M; ++m) total += d[m];
        const int cj = tape.corridor[static_cast<std::size_t>(n) * J + j];
        const double fac =
            asig[j] * gamma *
            (additive ? 1.0 : tape.local_var[static_cast<std::size_t>(n) * J + j]);
        for (int m = 0; m < M; ++m) {
          upstream(j, m) = fac * (static_cast<double>(d[m]) - (m == cj ? total : 0.0));
        }
      }
      backprop_spec(model.spec, model.partition, t, x_col, upstream, out.grad, gx, ws,
                    net_inputs, net_grad_in);
    }

    for (int j = 0; j < J; ++j) {
      // multiplicative mode scales the local-variance slope by (1 + correction)
      double lv_coeff = 1.0;
      if (!additive && asig[j] != 0.0) {
        const double lv = tape.local_var[static_cast<std::size_t>(n) * J + j];
        const double sig = ens.sigma(j, n);
        lv_coeff = sig * sig / lv;
      }
      a_next[j] = a[j] * ens.X(j, n + 1) / x_col[j] +
                  asig[j] * lv_coeff * model.surface->variance_dx(t, x_col[j]) + gx[j] +
                  hit(j, n);
    }
    a = a_next;
  }
  return out;
}

LossAndGradient fd_loss_gradient(const LovModel& model, const SimConfig& sim,
                                 const MarketEnvironment& env,
                                 const std::vector<OptionQuote>& instruments,
                                 double step, bool european_payoff) {
  const int P = spec_param_dim(model.spec);
  if (P == 0) throw std::invalid_argument("fd_loss_gradient: spec has no parameters");
  require_weights(instruments);

  const Eigen::VectorXd theta0 = spec_get_theta(model.spec);
  LovModel probe = model;

  auto loss_at = [&](const Eigen::VectorXd& theta) {
    probe.spec = clone_spec(model.spec);
    spec_set_theta(probe.spec, theta);
    PricedBatch b = price_batch(probe, sim, env, instruments, european_payoff);
    return calibration_loss(b.prices, instruments);
  };

  LossAndGradient out;
  {
    PricedBatch b = price_batch(model, sim, env, instruments, european_payoff);
    out.prices = b.prices;
    out.loss = calibration_loss(b.prices, instruments);
  }
  out.grad.resize(P);
  Eigen::VectorXd theta = theta0;
  for (int k = 0; k < P; ++k) {
    const double h = step * (1.0 + std::fabs(theta0[k]));
    theta[k] = theta0[k] + h;
    const double up = loss_at(theta);
    theta[k] = theta0[k] - h;
    const double dn = loss_at(theta);
    theta[k] = theta0[k];
    out.grad[k] = (up - dn) / (2.0 * h);
  }
  return out;
}

CalibrationResult calibrate(LovModel& model, const CalibConfig& config,
                            const MarketEnvironment& env,
                            const std::vector<OptionQuote>& instruments) {
  const int P = spec_param_dim(model.spec);
  if (P == 0) throw std::invalid_argument("calibrate: spec has no free parameters");
  require_weights(instruments);
  if (config.schedule.empty()) throw std::invalid_argument("calibrate: empty batch schedule");
  for (const auto& q : instruments) {
    if (q.expiry > config.sim.T + 1e-12) {
      throw std::invalid_argument("calibrate: instrument expiry beyond the simulation horizon");
    }
  }

  CalibrationResult result;
  result.alpha = threshold_alpha(instruments);

  std::ofstream history_csv;
  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    history_csv.open(config.out_dir + "/loss_history.csv");
    if (!history_csv) throw std::runtime_error("calibrate: cannot write loss history");
    history_csv << "epoch,loss,alpha,J\n";
    history_csv.precision(17);
  }

  AdamState adam(P, config.learning_rate);
  Eigen::VectorXd best_theta = spec_get_theta(model.spec);
  double best_loss = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < config.epoch_limit; ++epoch) {
    int pairs = config.schedule.front().pairs;
    for (const auto& stage : config.schedule) {
      if (stage.start_epoch <= epoch) pairs = stage.pairs;
    }
    SimConfig sim_e = config.sim;
    sim_e.J = 2 * pairs;
    sim_e.seed = config.seed + static_cast<std::uint64_t>(epoch) + 1;

    LossAndGradient lg =
        (config.method == GradientMethod::PathwiseFrozen)
            ? pathwise_loss_gradient(model, sim_e, env, instruments)
            : fd_loss_gradient(model, sim_e, env, instruments, config.fd_step);

    result.history.push_back({epoch, lg.loss, result.alpha, sim_e.J});
    if (history_csv.is_open()) {
      history_csv << epoch << "," << lg.loss << "," << result.alpha << "," << sim_e.J
                  << "\n";
    }
    if (lg.loss < best_loss) {
      best_loss = lg.loss;
      best_theta = spec_get_theta(model.spec);
    }
    if (!config.out_dir.empty() && config.checkpoint_every > 0 &&
        epoch % config.checkpoint_every == 0) {
      write_theta_csv(config.out_dir + "/theta_epoch_" + std::to_string(epoch) + ".csv",
                      spec_get_theta(model.spec));
    }

    // trailing-window stopping rule
    if (static_cast<int>(result.history.size()) >= config.window) {
      double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
      const std::size_t first = result.history.size() - static_cast<std::size_t>(config.window);
      for (std::size_t k = first; k < result.history.size(); ++k) {
        lo = std::min(lo, result.history[k].loss);
        hi = std::max(hi, result.history[k].loss);
      }
      if (hi < result.alpha && (hi - lo) < config.window_range_frac * result.alpha) {
        result.converged = true;
        break;
      }
    }

    Eigen::VectorXd theta = spec_get_theta(model.spec);
    adam_step(adam, theta, lg.grad);
    spec_set_theta(model.spec, theta);
  }

  if (!result.converged) {
    spec_set_theta(model.spec, best_theta);
  }
  result.theta = spec_get_theta(model.spec);

  // held-out pricing pass at the final parameters
  SimConfig sim_f = config.sim;
  sim_f.J = 2 * config.final_pairs;
  sim_f.seed = config.holdout_seed;
  PricedBatch final_batch = price_batch(model, sim_f, env, instruments);
  result.final_prices = final_batch.prices;
  result.final_loss = calibration_loss(final_batch.prices, instruments);

  if (!config.out_dir.empty()) {
    write_theta_csv(config.out_dir + "/theta_final.csv", result.theta);
    if (const auto* nn = std::get_if<NeuralSensitivity>(&model.spec)) {
      save_checkpoint(config.out_dir + "/network_final", *nn->net);
    }
  }
  return result;
}

}  // namespace lov
