#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "lov/sensitivity.hpp"

using namespace lov;

namespace {

Mlp make_net(std::uint64_t seed, bool affine = false) {
  Mlp::Config cfg;
  cfg.t_ref = 0.5;
  cfg.x0_ref = 100.0;
  cfg.affine_shift = affine;
  cfg.seed = seed;
  return Mlp(cfg);
}

CorridorPartition small_partition() {
  return CorridorPartition::build(100.0, 0.25, 1.0, 5);
}

}  // namespace

TEST_CASE("network parameter count for the 3-64-64-1 architecture") {
  CHECK(make_net(0).param_dim() == 3 * 64 + 64 + 64 * 64 + 64 + 64 + 1);  // 4481
  CHECK(make_net(0, true).param_dim() == 4483);
}

TEST_CASE("zero parameters give softplus(0) = ln 2 everywhere") {
  Mlp net = make_net(1);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(net.param_dim());
  net.set_theta(zero);
  CHECK(net.forward(0.1, 95.0, 105.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(net.forward(0.4, 150.0, 55.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("initialization is deterministic and within the Glorot bounds") {
  Mlp a = make_net(7), b = make_net(7), c = make_net(8);
  CHECK((a.theta() - b.theta()).isZero(0.0));
  CHECK(!(a.theta() - c.theta()).isZero(0.0));
  // first layer weights live in +-sqrt(6/(3+64))
  const double bound = std::sqrt(6.0 / 67.0);
  for (int i = 0; i < 3 * 64; ++i) {
    CHECK(std::fabs(a.theta()[i]) <= bound);
  }
  // hidden layer in +-sqrt(6/128)
  const double bound2 = std::sqrt(6.0 / 128.0);
  for (int i = 3 * 64 + 64; i < 3 * 64 + 64 + 64 * 64; ++i) {
    CHECK(std::fabs(a.theta()[i]) <= bound2);
  }
}

TEST_CASE("network output is nonnegative without the affine shift") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Mlp net = make_net(100 + trial);
    for (int i = 0; i < 10000; ++i) {
      const double v = net.forward(u(gen), 40.0 + 160.0 * u(gen), 40.0 + 160.0 * u(gen));
      CHECK(v >= 0.0);
    }
  }
}

TEST_CASE("backprop matches central finite differences") {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int probe = 0; probe < 20; ++probe) {
    Mlp net = make_net(500 + probe, probe % 2 == 1);
    Eigen::MatrixXd in(1, 3);
    in << 0.5 * u(gen), 60.0 + 80.0 * u(gen), 60.0 + 80.0 * u(gen);

    Mlp::Workspace ws;
    net.forward_batch(in, ws);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.param_dim());
    net.backward(ws, Eigen::VectorXd::Ones(1), grad);

    std::uniform_int_distribution<int> pick(0, net.param_dim() - 1);
    Eigen::VectorXd theta = net.theta();
    for (int rep = 0; rep < 50; ++rep) {
      const int k = pick(gen);
      const double h = 1e-6 * (1.0 + std::fabs(theta[k]));
      Eigen::VectorXd bump = theta;
      bump[k] = theta[k] + h;
      net.set_theta(bump);
      net.forward_batch(in, ws);
      const double up = ws.out[0];
      bump[k] = theta[k] - h;
      net.set_theta(bump);
      net.forward_batch(in, ws);
      const double dn = ws.out[0];
      net.set_theta(theta);
      const double fd = (up - dn) / (2.0 * h);
      const double scale = std::max({std::fabs(fd), std::fabs(grad[k]), 1e-8});
      CHECK(std::fabs(fd - grad[k]) / scale < 1e-5);
    }
  }
}

TEST_CASE("backprop input gradients match finite differences") {
  Mlp net = make_net(77);
  Eigen::MatrixXd in(2, 3);
  in << 0.3, 95.0, 110.0, 0.1, 120.0, 80.0;
  Mlp::Workspace ws;
  net.forward_batch(in, ws);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.param_dim());
  Eigen::MatrixXd gin;
  Eigen::VectorXd upstream(2);
  upstream << 1.0, -2.0;
  net.backward(ws, upstream, grad, &gin);

  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 3; ++c) {
      const double h = 1e-6 * (1.0 + std::fabs(in(r, c)));
      Eigen::MatrixXd bumped = in;
      bumped(r, c) += h;
      net.forward_batch(bumped, ws);
      const double up = ws.out[r];
      bumped(r, c) = in(r, c) - h;
      net.forward_batch(bumped, ws);
      const double dn = ws.out[r];
      const double fd = upstream[r] * (up - dn) / (2.0 * h);
      CHECK(fd == doctest::Approx(gin(r, c)).epsilon(1e-4));
    }
  }
}

TEST_CASE("batch gradient is the sum of single-input gradients") {
  Mlp net = make_net(31);
  Eigen::MatrixXd both(2, 3);
  both << 0.2, 90.0, 100.0, 0.4, 110.0, 95.0;
  Mlp::Workspace ws;

  net.forward_batch(both, ws);
  Eigen::VectorXd g_batch = Eigen::VectorXd::Zero(net.param_dim());
  net.backward(ws, Eigen::VectorXd::Ones(2), g_batch);

  Eigen::VectorXd g_sum = Eigen::VectorXd::Zero(net.param_dim());
  for (int r = 0; r < 2; ++r) {
    net.forward_batch(both.row(r), ws);
    net.backward(ws, Eigen::VectorXd::Ones(1), g_sum);
  }
  CHECK((g_batch - g_sum).lpNorm<Eigen::Infinity>() < 1e-12);

  // zero upstream -> zero gradient
  net.forward_batch(both, ws);
  Eigen::VectorXd g0 = Eigen::VectorXd::Zero(net.param_dim());
  net.backward(ws, Eigen::VectorXd::Zero(2), g0);
  CHECK(g0.isZero(0.0));
}

TEST_CASE("eval: closed-form variants") {
  auto partition = small_partition();
  CHECK(eval(ZeroSensitivity{}, 0.3, 100.0, 120.0, partition) == 0.0);

  const TanhSensitivity tanh_spec{0.01, 1.0};
  CHECK(eval(tanh_spec, 0.0, 100.0, 100.0, partition) ==
        doctest::Approx(0.01 * std::tanh(1.0)).epsilon(1e-15));
  CHECK(0.01 * std::tanh(1.0) == doctest::Approx(0.0076159).epsilon(1e-4));
  // nondecreasing in x
  double prev = -1e9;
  for (double x = 10.0; x < 300.0; x += 1.0) {
    const double v = eval(tanh_spec, 0.1, 100.0, x, partition);
    CHECK(v >= prev);
    prev = v;
  }

  OneFactorCorridor upside;
  upside.beta = 0.3;
  upside.corridors = {3, 4};
  const auto& nodes = partition.nodes();
  CHECK(eval(upside, 0.0, 100.0, nodes[0], partition) == 0.0);
  CHECK(eval(upside, 0.0, 100.0, nodes[4], partition) == doctest::Approx(0.3));

  const EmaLogSensitivity ema{0.02};
  CHECK(eval(ema, 0.0, 100.0, 120.0, partition) ==
        doctest::Approx(0.02 * std::log(120.0)).epsilon(1e-15));
}

TEST_CASE("eval_batch agrees with pointwise eval, including the network") {
  auto partition = small_partition();
  Eigen::VectorXd spots(3);
  spots << 80.0, 100.0, 130.0;

  for (SensitivitySpec spec :
       {SensitivitySpec{ZeroSensitivity{}}, SensitivitySpec{TanhSensitivity{0.01, 2.0}},
        SensitivitySpec{NeuralSensitivity{std::make_shared<Mlp>(make_net(3))}}}) {
    Eigen::MatrixXd batch = eval_batch(spec, 0.25, spots, partition);
    REQUIRE(batch.rows() == 3);
    REQUIRE(batch.cols() == partition.size());
    for (int j = 0; j < 3; ++j) {
      for (int m = 0; m < partition.size(); ++m) {
        CHECK(batch(j, m) ==
              doctest::Approx(eval(spec, 0.25, spots[j], partition.nodes()[m], partition))
                  .epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("spec validation and the safe tanh construction") {
  VolGrid g({0.1, 0.5, 1.0}, {50, 100, 150, 200}, std::vector<double>(12, 0.2));
  LocalVolSurface surface{g};
  const auto safe = make_tanh_spec(surface, 1.0, 1.0);
  CHECK(safe.scale == doctest::Approx(0.25 * 0.04).epsilon(1e-15));
  CHECK_NOTHROW(validate_spec(safe, &surface, 1.0));

  CHECK_THROWS(validate_spec(TanhSensitivity{0.5 * 0.04, 1.0}, &surface, 1.0));

  OneFactorCorridor bad;
  bad.beta = 0.6;
  bad.multiplicative = true;
  bad.corridors = {0};
  CHECK_THROWS(validate_spec(bad));
  bad.beta = 0.4;
  CHECK_NOTHROW(validate_spec(bad));
}

TEST_CASE("checkpoint round trip is exact") {
  Mlp net = make_net(999, true);
  const auto prefix =
      (std::filesystem::temp_directory_path() / "mlp_checkpoint_test").string();
  save_checkpoint(prefix, net);
  Mlp back = load_checkpoint(prefix);
  CHECK(back.param_dim() == net.param_dim());
  CHECK((back.theta() - net.theta()).isZero(0.0));  // bitwise
  CHECK(back.config().t_ref == net.config().t_ref);
  CHECK(back.config().x0_ref == net.config().x0_ref);
  CHECK(back.config().affine_shift == net.config().affine_shift);
}

TEST_CASE("adam updates") {
  const int dim = 8;
  Eigen::VectorXd theta = Eigen::VectorXd::Constant(dim, 0.5);

  AdamState idle(dim);
  Eigen::VectorXd before = theta;
  adam_step(idle, theta, Eigen::VectorXd::Zero(dim));
  CHECK((theta - before).isZero(0.0));  // zero gradient is a fixed point

  // first step moves by -lr * sign(g) up to epsilon rounding
  AdamState s(dim, 1e-3);
  Eigen::VectorXd g(dim);
  for (int i = 0; i < dim; ++i) g[i] = (i % 2 == 0) ? 0.3 : -1.7;
  adam_step(s, theta, g);
  for (int i = 0; i < dim; ++i) {
    const double moved = theta[i] - before[i];
    const double expected = (i % 2 == 0) ? -1e-3 : 1e-3;
    CHECK(moved == doctest::Approx(expected).epsilon(1e-4));
  }

  // determinism: identical states give identical outputs
  AdamState s1(dim, 1e-3), s2(dim, 1e-3);
  Eigen::VectorXd t1 = before, t2 = before;
  adam_step(s1, t1, g);
  adam_step(s2, t2, g);
  CHECK((t1 - t2).isZero(0.0));
}
