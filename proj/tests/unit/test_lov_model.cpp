#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "lov/lov_model.hpp"
#include "lov/simulate.hpp"

using namespace lov;

namespace {

VolGrid flat_grid(double vol) {
  return VolGrid({0.1, 0.5, 1.0}, {50, 100, 150, 200}, std::vector<double>(12, vol));
}

LovModel make_model(const LocalVolSurface& surface, SensitivitySpec spec,
                    CorrectionMode mode = CorrectionMode::Additive) {
  return LovModel{&surface, CorridorPartition::build(100.0, 0.25, 1.0, 5),
                  std::move(spec), mode, 0.0, 1e-4, 4.0, false};
}

}  // namespace

TEST_CASE("variance: centered term vanishes and the zero spec is exact") {
  LocalVolSurface surface{flat_grid(0.2)};
  auto model = make_model(surface, TanhSensitivity{0.01, 1.0});

  std::vector<double> occ{0.1, 0.2, 0.3, 0.1, 0.05};
  const double mass = 0.75;
  const double s03 = surface.at(0.3, 100.0), s00 = surface.at(0.0, 100.0);
  // O = Ohat: exactly sigma_loc^2 (bitwise)
  CHECK(lov_variance(model, 0.3, 100.0, occ, occ, mass) == s03 * s03);

  auto zero_model = make_model(surface, ZeroSensitivity{});
  std::vector<double> proj{0.15, 0.15, 0.15, 0.15, 0.15};
  CHECK(lov_variance(zero_model, 0.3, 100.0, occ, proj, mass) == s03 * s03);

  // empty measure: exactly sigma_loc^2
  std::vector<double> empty(5, 0.0);
  CHECK(lov_variance(model, 0.0, 100.0, empty, empty, 0.0) == s00 * s00);
}

TEST_CASE("variance: single excess mass in one corridor") {
  LocalVolSurface surface{flat_grid(0.2)};
  // ell nonzero only at node 4; spot sits in corridor 2, where ell = 0, so the
  // centering leaves the hand-computed value intact.
  OneFactorCorridor spec;
  spec.beta = 0.01;
  spec.corridors = {4};
  auto model = make_model(surface, spec);

  const double kappa = 12.0, t = 1.0 / 12.0, dt = 1.0 / 252.0;
  model.kappa = kappa;
  const double excess = std::exp(kappa * t) * dt;
  std::vector<double> occ{0.0, 0.0, 0.1, 0.0, excess};
  std::vector<double> proj{0.0, 0.0, 0.1 + excess, 0.0, 0.0};  // same total
  const double mass = 0.1 + excess;
  const double expected = 0.04 + (1.0 / mass) * 0.01 * excess;
  CHECK(lov_variance(model, t, 100.0, occ, proj, mass) ==
        doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("variance clamping and the event counter") {
  LocalVolSurface surface{flat_grid(0.2)};
  OneFactorCorridor spec;
  spec.beta = -50.0;  // deliberately explosive
  spec.corridors = {4};
  auto model = make_model(surface, spec);

  std::vector<double> occ{0.0, 0.0, 0.0, 0.0, 1.0};
  std::vector<double> proj{1.0, 0.0, 0.0, 0.0, 0.0};
  long clamps = 0;
  const double v = lov_variance(model, 0.3, 100.0, occ, proj, 1.0, &clamps);
  CHECK(v == model.var_floor);
  CHECK(clamps == 1);

  spec.beta = 50.0;
  auto cap_model = make_model(surface, spec);
  clamps = 0;
  CHECK(lov_variance(cap_model, 0.3, 100.0, occ, proj, 1.0, &clamps) == cap_model.var_cap);
  CHECK(clamps == 1);
}

TEST_CASE("additive and multiplicative agree when ell_mult = ell/sigma_loc^2") {
  LocalVolSurface surface{flat_grid(0.23)};
  auto partition = CorridorPartition::build(100.0, 0.25, 1.0, 5);
  const double lv = 0.23 * 0.23;

  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> ell(5), occ(5), proj(5);
    double occ_mass = 0.0;
    for (int m = 0; m < 5; ++m) {
      ell[m] = 0.02 * (u(gen) - 0.5);
      occ[m] = u(gen);
      occ_mass += occ[m];
    }
    double proj_mass = 0.0;
    for (int m = 0; m < 5; ++m) {
      proj[m] = u(gen);
      proj_mass += proj[m];
    }
    for (int m = 0; m < 5; ++m) proj[m] *= occ_mass / proj_mass;

    LovModel add{&surface, partition, ZeroSensitivity{}, CorrectionMode::Additive,
                 0.0, 1e-4, 4.0, false};
    LovModel mul = add;
    mul.mode = CorrectionMode::Multiplicative;

    std::vector<double> ell_scaled(5);
    for (int m = 0; m < 5; ++m) ell_scaled[m] = ell[m] / lv;

    const int cj = partition.locate(100.0);
    const double va = lov_variance_with_ell(add, 0.3, 100.0, ell, cj, occ, proj, occ_mass);
    const double vm =
        lov_variance_with_ell(mul, 0.3, 100.0, ell_scaled, cj, occ, proj, occ_mass);
    CHECK(va == doctest::Approx(vm).epsilon(1e-12));
  }
}

TEST_CASE("pre-clamp positivity under the half-variance bound") {
  LocalVolSurface surface{flat_grid(0.2)};
  auto model = make_model(surface, make_tanh_spec(surface, 1.0, 1.0));
  model.var_floor = 1e-300;  // effectively unclamped
  model.var_cap = 1e300;

  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  long clamps = 0;
  for (int trial = 0; trial < 1000000 / 5; ++trial) {
    std::vector<double> occ(5), proj(5);
    double occ_mass = 0.0, proj_mass = 0.0;
    for (int m = 0; m < 5; ++m) {
      occ[m] = u(gen);
      proj[m] = u(gen);
      occ_mass += occ[m];
      proj_mass += proj[m];
    }
    for (int m = 0; m < 5; ++m) proj[m] *= occ_mass / proj_mass;
    const double x = 60.0 + 100.0 * u(gen);
    const double v = lov_variance(model, u(gen), x, occ, proj, occ_mass, &clamps);
    REQUIRE(v > 0.0);
  }
  CHECK(clamps == 0);
}

TEST_CASE("centered pairing kills constants bitwise") {
  std::vector<double> ell(7, 0.0123456789);
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> occ(7), proj(7);
    for (int m = 0; m < 7; ++m) {
      occ[m] = u(gen);
      proj[m] = u(gen);  // mass mismatch is irrelevant for the bitwise claim
    }
    CHECK(centered_pairing(ell, trial % 7, occ, proj) == 0.0);
  }
}

TEST_CASE("positivity bound report") {
  LocalVolSurface surface{flat_grid(0.2)};
  std::vector<double> t_grid{0.05, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> x_grid;
  for (int i = 0; i <= 20; ++i) x_grid.push_back(50.0 + 7.5 * i);

  // tanh at the safe quarter-variance scale: pass with margin >= 1/4 min var
  auto safe = make_model(surface, make_tanh_spec(surface, 1.0, 1.0));
  auto report = check_positivity_bound(safe, t_grid, x_grid);
  CHECK(report.pass);
  CHECK(report.worst_margin >= 0.25 * 0.04 - 1e-12);

  // multiplicative one-factor with |beta| < 1/2: pass
  OneFactorCorridor of;
  of.beta = 0.4;
  of.multiplicative = true;
  of.corridors = {0, 1, 2, 3, 4};
  auto mult = make_model(surface, of, CorrectionMode::Multiplicative);
  CHECK(check_positivity_bound(mult, t_grid, x_grid).pass);

  // constant ell at the full minimum variance: fail with a negative margin
  OneFactorCorridor loud;
  loud.beta = 0.04;
  loud.corridors = {0, 1, 2, 3, 4};
  auto bad = make_model(surface, loud);
  auto bad_report = check_positivity_bound(bad, t_grid, x_grid);
  CHECK(!bad_report.pass);
  CHECK(bad_report.worst_margin < 0.0);
}
