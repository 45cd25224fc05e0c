#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kvflow/energy.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace kvflow;

namespace {

constexpr double kPi = std::numbers::pi;

Scenario base(int n) {
  Scenario s;
  s.nx = s.ny = n;
  s.material.visc_lambda = 0.1;
  s.material.visc_mu = 0.1;
  s.material.nu = 1e-3;
  s.material.p = 3.0;
  s.energy = StoredEnergyModel::from(s.material);
  return s;
}

}  // namespace

TEST_CASE("ledger stays constant at equilibrium") {
  const Dynamics dyn(base(12));
  SimState s = dyn.initial_state();
  EnergyLedger l = ledger_start(ledger_sample(dyn, s));
  for (int n = 0; n < 200; ++n) {
    const StepReport r = dyn.step_report(s, 1e-3);
    l = ledger_accumulate(l, r.stages, 1e-3, ledger_sample(dyn, r.next), r.next.t);
    s = r.next;
  }
  CHECK(std::abs(l.residual) < 1e-12);
  CHECK(l.total() == doctest::Approx(0.0));
}

TEST_CASE("stage quadrature integrates constant and linear rates") {
  EnergyLedger l = ledger_start({1.0, 2.0, 0.0, 0.0});
  CHECK(l.initial_total == 3.0);
  std::array<StageRecord, 3> st;
  const double w[3] = {0.25, 0.0, 0.75};
  const double c[3] = {0.0, 8.0 / 15.0, 2.0 / 3.0};
  for (int k = 0; k < 3; ++k) {
    st[k].weight = w[k];
    st[k].t = c[k];
    st[k].diagnostics.dissipation_rate = 3.0;
    st[k].diagnostics.external_power = 1.0 + 2.0 * c[k];  // exact mean over [0, 1] is 2
  }
  l = ledger_accumulate(l, st, 1.0, {0.5, 1.5, 0.0, 0.0}, 1.0);
  CHECK(l.dissipation_cum == doctest::Approx(3.0));
  CHECK(l.work_cum == doctest::Approx(2.0));
  // 2 + 3 - 2 - 3
  CHECK(l.residual == doctest::Approx(0.0));
  CHECK(l.residual_relative() == doctest::Approx(0.0));
}

TEST_CASE("kinetic, stored and dissipation terms against closed forms") {
  Scenario sc = base(8);
  sc.material.p = 2.0;
  sc.energy = StoredEnergyModel::from(sc.material, EnergyKind::svk);
  sc.material.rho = 1.7;
  sc.F0 = [](double, double) {
    Mat2 F = Mat2::Identity();
    F(0, 0) = 2.0;
    return F;
  };
  const Dynamics dyn(sc);
  SimState s = dyn.initial_state();
  const double a = 0.3;
  s.v[0](2, 0) = a;
  const StateDiagnostics d = dyn.diagnostics(s);
  const double k = 2.0 * kPi;
  const MaterialParams& m = sc.material;
  CHECK(d.kinetic == doctest::Approx(0.5 * 1.7 * a * a).epsilon(1e-14));
  CHECK(d.stored == doctest::Approx(2.25).epsilon(1e-13));
  CHECK(d.dissipation_rate ==
        doctest::Approx((m.visc_lambda + 2.0 * m.visc_mu) * k * k * a * a + m.nu * std::pow(k, 4) * a * a)
            .epsilon(1e-12));
  CHECK(d.external_power == 0.0);
}

TEST_CASE("external power of a body force") {
  Scenario sc = base(8);
  sc.body_force = [](double, double x, double y) {
    return Vec2(std::sin(kPi * x) * std::cos(kPi * y), 0.5 * std::cos(kPi * x) * std::sin(2.0 * kPi * y));
  };
  const Dynamics dyn(sc);
  SimState s = dyn.initial_state();
  s.v[0](1, 1) = 0.4;  // 2 sin(pi x) cos(pi y)
  s.v[1](1, 2) = -0.2; // 2 cos(pi x) sin(2 pi y)
  // int f.v = 0.4 * 2 / 4 + 0.5 * (-0.2) * 2 / 4
  CHECK(dyn.diagnostics(s).external_power == doctest::Approx(0.2 - 0.05).epsilon(1e-13));
}

TEST_CASE("dissipation is nonnegative on random states") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> n01(0.0, 1.0);
  const Dynamics dyn(base(12));
  const Basis& b = dyn.basis();
  for (int trial = 0; trial < 20; ++trial) {
    SimState s = dyn.initial_state();
    for (int c = 0; c < 2; ++c) {
      for (int j = 0; j < 12; ++j)
        for (int i = 0; i < 12; ++i) s.v[c](i, j) = n01(rng) / (1.0 + i * i + j * j);
      s.v[c] = s.v[c].cwiseProduct(b.mask(kVelocityFamilies[c]));
    }
    CHECK(dyn.diagnostics(s).dissipation_rate >= -1e-14);
  }
}

TEST_CASE("a priori monitors at the identity") {
  Scenario sc = base(8);
  sc.domain = {2.0, 1.0};
  const Dynamics dyn(sc);
  const AprioriMonitors m = apriori_monitors(dyn, dyn.initial_state());
  CHECK(m.F_L2 == doctest::Approx(2.0).epsilon(1e-14));  // sqrt(2 * area)
  CHECK(m.gradF_L2 == doctest::Approx(0.0));
  CHECK(m.v_L2 == 0.0);
  CHECK(m.min_detF == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(m.gradE_Lp == doctest::Approx(0.0));
}

TEST_CASE("a priori monitors of a single mode") {
  Scenario sc = base(8);
  sc.material.p = 2.0;
  const Dynamics dyn(sc);
  SimState s = dyn.initial_state();
  const double a = 0.5;
  s.v[0](1, 0) = a;  // sqrt2 sin(pi x)
  const AprioriMonitors m = apriori_monitors(dyn, s);
  CHECK(m.v_L2 == doctest::Approx(a));
  // grad E = d_x^2 v1 only, L2 norm pi^2 a.
  CHECK(m.gradE_Lp == doctest::Approx(kPi * kPi * a).epsilon(1e-12));
  // max |d_x v1| = sqrt2 pi a at the grid node nearest x = 0.
  CHECK(m.gradv_Linf <= std::sqrt(2.0) * kPi * a + 1e-12);
  CHECK(m.gradv_Linf > 0.98 * std::sqrt(2.0) * kPi * a);
}
