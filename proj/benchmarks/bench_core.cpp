#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "lov/lsmc.hpp"
#include "lov/sensitivity.hpp"
#include "lov/simulate.hpp"
#include "lov/surface.hpp"

namespace {

lov::VolGrid flat_grid(double vol) {
  return lov::VolGrid({0.1, 0.5, 1.0}, {50, 100, 150, 200},
                      std::vector<double>(12, vol));
}

void bm_projection(benchmark::State& state) {
  const int J = static_cast<int>(state.range(0)), M = 63;
  std::mt19937_64 gen(1);
  std::normal_distribution<double> z(100.0, 10.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd x(J);
  std::vector<double> occ(static_cast<std::size_t>(J) * M);
  for (int j = 0; j < J; ++j) x[j] = z(gen);
  for (auto& o : occ) o = u(gen);
  const double h = lov::bandwidth(x, 1.5);
  for (auto _ : state) {
    auto est = lov::project_occupation(occ, J, M, x, h);
    benchmark::DoNotOptimize(est.projected.data());
  }
  state.SetItemsProcessed(state.iterations() * J);
}

void bm_network_forward(benchmark::State& state) {
  const int B = static_cast<int>(state.range(0));
  lov::Mlp::Config cfg;
  cfg.t_ref = 1.0;
  cfg.x0_ref = 100.0;
  cfg.seed = 3;
  lov::Mlp net(cfg);
  Eigen::MatrixXd in(B, 3);
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int r = 0; r < B; ++r) {
    in(r, 0) = u(gen);
    in(r, 1) = 60.0 + 80.0 * u(gen);
    in(r, 2) = 60.0 + 80.0 * u(gen);
  }
  lov::Mlp::Workspace ws;
  for (auto _ : state) {
    net.forward_batch(in, ws);
    benchmark::DoNotOptimize(ws.out.data());
  }
  state.SetItemsProcessed(state.iterations() * B);
}

void bm_simulate(benchmark::State& state) {
  const int J = static_cast<int>(state.range(0));
  lov::LocalVolSurface surface{flat_grid(0.2)};
  lov::MarketEnvironment env{100.0, 0.02, 0.0, ""};
  lov::SimConfig cfg;
  cfg.T = 0.25;
  cfg.N = 32;
  cfg.J = J;
  cfg.M = 63;
  cfg.kappa = 12.0;
  const auto spec = lov::make_tanh_spec(surface, cfg.T, 1.0);
  for (auto _ : state) {
    auto ens = lov::simulate_lov(cfg, env, surface, spec);
    benchmark::DoNotOptimize(ens.X.data());
  }
  state.SetItemsProcessed(state.iterations() * J * cfg.N);
}

void bm_lsmc(benchmark::State& state) {
  const int J = static_cast<int>(state.range(0));
  lov::LocalVolSurface surface{flat_grid(0.2)};
  lov::MarketEnvironment env{100.0, 0.05, 0.0, ""};
  lov::SimConfig cfg;
  cfg.T = 1.0;
  cfg.N = 50;
  cfg.J = J;
  cfg.M = 31;
  cfg.record_bands = true;
  auto ens = lov::simulate_lov(cfg, env, surface, lov::ZeroSensitivity{});
  const auto dates = lov::all_steps_to(ens, 1.0);
  for (auto _ : state) {
    auto r = lov::price_american_put(ens, 100.0, 1.0, env.rate, dates);
    benchmark::DoNotOptimize(r.price);
  }
  state.SetItemsProcessed(state.iterations() * J);
}

BENCHMARK(bm_projection)->Arg(1 << 12)->Arg(1 << 14)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_network_forward)->Arg(1 << 12)->Arg(1 << 16)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_simulate)->Arg(1 << 10)->Arg(1 << 12)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_lsmc)->Arg(1 << 12)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
