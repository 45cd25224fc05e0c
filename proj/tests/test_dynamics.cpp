#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kvflow/dynamics.hpp"
#include "kvflow/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

using namespace kvflow;

namespace {

constexpr double kPi = std::numbers::pi;

Scenario base_scenario(int n) {
  Scenario s;
  s.name = "unit";
  s.nx = s.ny = n;
  s.material.rho = 1.0;
  s.material.visc_lambda = 0.1;
  s.material.visc_mu = 0.1;
  s.material.nu = 1e-3;
  s.material.p = 3.0;
  s.energy = StoredEnergyModel::from(s.material);
  s.dt = 1e-3;
  s.t_end = 0.1;
  return s;
}

StoredEnergyModel zero_energy() {
  StoredEnergyModel m;
  m.kind = EnergyKind::custom;
  m.custom_value = [](const Mat2&) { return 0.0; };
  m.custom_derivative = [](const Mat2&) { return Mat2::Zero().eval(); };
  return m;
}

Coeffs random_coeffs(const Basis& b, Family f, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Coeffs c(b.nx(), b.ny());
  for (int j = 0; j < b.ny(); ++j)
    for (int i = 0; i < b.nx(); ++i) c(i, j) = n01(rng) / (1.0 + i * i + j * j);
  return c.cwiseProduct(b.mask(f));
}

double distance(const SimState& a, const SimState& b) {
  double s = 0.0;
  for (int c = 0; c < 2; ++c) s += (a.v[c] - b.v[c]).squaredNorm();
  for (int c = 0; c < 4; ++c) s += (a.F[c] - b.F[c]).squaredNorm();
  return std::sqrt(s);
}

SimState integrate(const Dynamics& dyn, SimState s, double t_end, double dt, int* implicit = nullptr) {
  const long n = std::lround(t_end / dt);
  for (long k = 0; k < n; ++k) {
    const StepReport r = dyn.step_report(s, dt);
    if (implicit) *implicit = std::max(*implicit, r.implicit_directions);
    s = r.next;
  }
  return s;
}

}  // namespace

TEST_CASE("rest state with identity deformation is a fixed point") {
  const Dynamics dyn(base_scenario(12));
  const SimState s0 = dyn.initial_state();
  const Rates r = dyn.rates(s0);
  // Projection of I carries round-off of order k * 1e-16.
  for (const Coeffs& c : r.v) CHECK(c.cwiseAbs().maxCoeff() < 1e-12);
  for (const Coeffs& c : r.F) CHECK(c.cwiseAbs().maxCoeff() == 0.0);
  const SimState s = integrate(dyn, s0, 0.05, 1e-3);
  CHECK(distance(s, s0) < 1e-14);
}

TEST_CASE("single-mode body force accelerates at f / rho") {
  Scenario sc = base_scenario(8);
  sc.material.rho = 2.5;
  const double a = 0.8;
  // 2 sin(pi x) cos(pi y) is the normalised sc(1, 1) mode on the unit square.
  sc.body_force = [a](double, double x, double y) {
    return Vec2(a * std::sin(kPi * x) * std::cos(kPi * y), 0.0);
  };
  const Dynamics dyn(sc);
  const VelocityCoeffs r = dyn.momentum_rhs(dyn.initial_state());
  CHECK(r[0](1, 1) == doctest::Approx(a / 2.0 / 2.5).epsilon(1e-12));
  Coeffs rest = r[0];
  rest(1, 1) = 0.0;
  CHECK(rest.cwiseAbs().maxCoeff() < 1e-14);
  CHECK(r[1].cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("transport of the identity yields the velocity gradient") {
  Scenario sc = base_scenario(8);
  sc.material.eps = 0.05;
  const Dynamics dyn(sc);
  SimState s = dyn.initial_state();
  s.v[0].setZero();
  s.v[1].setZero();
  s.v[0](2, 1) = 0.3;   // sqrt2 sin(2 pi x) sqrt2 cos(pi y)
  s.v[1](1, 3) = -0.2;  // sqrt2 cos(pi x) sqrt2 sin(3 pi y)
  const DeformationCoeffs r = dyn.transport_rhs(s);
  // d_x sin(2 pi x) = 2 pi cos(2 pi x); d_y cos(pi y) = -pi sin(pi y).
  CHECK(r[0](2, 1) == doctest::Approx(0.3 * 2.0 * kPi).epsilon(1e-12));
  CHECK(r[1](2, 1) == doctest::Approx(-0.3 * kPi).epsilon(1e-12));
  CHECK(r[2](1, 3) == doctest::Approx(0.2 * kPi).epsilon(1e-12));
  CHECK(r[3](1, 3) == doctest::Approx(-0.2 * 3.0 * kPi).epsilon(1e-12));
  double other = 0.0;
  for (int c = 0; c < 4; ++c) other += r[c].cwiseAbs().sum();
  CHECK(other == doctest::Approx(0.3 * 3.0 * kPi + 0.2 * 4.0 * kPi).epsilon(1e-12));
}

TEST_CASE("small single mode decays at the linear rate with p = 2") {
  Scenario sc = base_scenario(8);
  sc.material.p = 2.0;
  sc.material.nu = 1e-4;
  sc.energy = zero_energy();
  const Dynamics dyn(sc);
  SimState s = dyn.initial_state();
  const double a0 = 1e-7;
  s.v[0](3, 0) = a0;
  const double k = 3.0 * kPi;
  const MaterialParams& m = sc.material;
  const double rate = ((m.visc_lambda + 2.0 * m.visc_mu) * k * k + m.nu * k * k * k * k) / m.rho;
  const double t = 0.2;
  int implicit = 0;
  const SimState end = integrate(dyn, s, t, 1e-3, &implicit);
  CHECK(implicit == 0);
  CHECK(end.v[0](3, 0) == doctest::Approx(a0 * std::exp(-rate * t)).epsilon(1e-6));
}

TEST_CASE("stiff modes are treated implicitly and stay bounded") {
  Scenario sc = base_scenario(16);
  sc.material.p = 2.0;
  sc.material.nu = 1e-2;
  sc.energy = zero_energy();
  const Dynamics dyn(sc);
  SimState s = dyn.initial_state();
  s.v[0](15, 0) = 1e-6;
  const StepReport r = dyn.step_report(s, 1e-2);
  CHECK(r.implicit_directions > 0);
  CHECK(std::abs(r.next.v[0](15, 0)) < 1e-6);
}

TEST_CASE("explicit regime converges at third order") {
  Scenario sc = base_scenario(8);
  sc.material.p = 2.0;
  sc.material.nu = 1e-5;
  sc.v0 = stream_function_velocity(sc.domain, 0.5);
  sc.F0 = [](double x, double y) {
    Mat2 F = Mat2::Identity();
    F(0, 0) += 0.1 * std::cos(kPi * x);
    F(0, 1) = 0.05 * std::sin(kPi * x) * std::sin(kPi * y);
    return F;
  };
  const Dynamics dyn(sc);
  const SimState s0 = dyn.initial_state();
  const double t = 0.2;
  int implicit = 0;
  const SimState ref = integrate(dyn, s0, t, 1.25e-4, &implicit);
  std::vector<double> err;
  for (double dt : {2e-3, 1e-3, 5e-4}) err.push_back(distance(integrate(dyn, s0, t, dt, &implicit), ref));
  CHECK(implicit == 0);
  for (std::size_t i = 1; i < err.size(); ++i) {
    const double order = std::log2(err[i - 1] / err[i]);
    INFO("order " << order);
    CHECK(order > 2.7);
  }
}

TEST_CASE("deformation diffusion damps a cosine mode") {
  Scenario sc = base_scenario(8);
  sc.material.eps = 1e-2;
  sc.prescribed_velocity = [&sc](double) {
    return VelocityCoeffs{Coeffs::Zero(sc.nx, sc.ny), Coeffs::Zero(sc.nx, sc.ny)};
  };
  sc.F0 = [](double x, double y) {
    Mat2 F = Mat2::Identity();
    F(1, 1) += 0.2 * std::cos(2.0 * kPi * x) * std::cos(kPi * y);
    return F;
  };
  const Dynamics dyn(sc);
  const SimState s0 = dyn.initial_state();
  const SimState s = integrate(dyn, s0, 0.5, 1e-3);
  const double lam = 5.0 * kPi * kPi;
  CHECK(s.F[3](2, 1) == doctest::Approx(s0.F[3](2, 1) * std::exp(-1e-2 * lam * 0.5)).epsilon(1e-8));
  CHECK(s.F[3](0, 0) == doctest::Approx(s0.F[3](0, 0)).epsilon(1e-14));
}

TEST_CASE("convective load is energy neutral") {
  std::mt19937_64 rng(31);
  const Dynamics dyn(base_scenario(16));
  const Basis& b = dyn.basis();
  for (int k = 0; k < 5; ++k) {
    const VelocityCoeffs v{random_coeffs(b, Family::sc, rng), random_coeffs(b, Family::cs, rng)};
    const VelocityCoeffs c = dyn.convective_load(v);
    const double tested = v[0].cwiseProduct(c[0]).sum() + v[1].cwiseProduct(c[1]).sum();
    const std::array<Grid, 2> g = dyn.velocity_grids(v);
    const Grid speed3 = (g[0].cwiseAbs2() + g[1].cwiseAbs2()).cwiseSqrt().array().cube();
    CHECK(std::abs(tested) < 1e-10 * b.integrate(speed3));
  }
}

TEST_CASE("hyperviscosity shift") {
  Scenario sc = base_scenario(8);
  const Dynamics cubic(sc);
  CHECK(cubic.hyperviscosity_shift(2.0) == doctest::Approx(1.25 * 2.0 * 1e-3 * 2.0));
  sc.material.p = 2.0;
  const Dynamics quad(sc);
  CHECK(quad.hyperviscosity_shift(7.0) == doctest::Approx(1e-3));
}

TEST_CASE("stream-function velocity is divergence free and tangential") {
  const Domain d{2.0, 1.0};
  const VectorFn v = stream_function_velocity(d, 1.5);
  const double h = 1e-5;
  for (double x : {0.3, 1.1, 1.7}) {
    for (double y : {0.2, 0.5, 0.9}) {
      const double div = (v(x + h, y).x() - v(x - h, y).x() + v(x, y + h).y() - v(x, y - h).y()) / (2 * h);
      CHECK(std::abs(div) < 1e-8);
    }
  }
  CHECK(std::abs(v(0.0, 0.4).x()) < 1e-15);
  CHECK(std::abs(v(0.7, 1.0).y()) < 1e-15);
}

TEST_CASE("non-finite states are reported as numerical errors") {
  const Dynamics dyn(base_scenario(8));
  SimState s = dyn.initial_state();
  s.v[0](1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(dyn.rates(s), NumericalError);
  CHECK_THROWS_AS(dyn.step(s, 1e-3), NumericalError);
  Scenario bad = base_scenario(8);
  bad.dt = 0.0;
  CHECK_THROWS_AS(Dynamics{bad}, ConfigError);
}

TEST_CASE("manufactured steady forcing cancels every momentum term") {
  // v* = A (sin cos, -cos sin), F* = I, p = 2: (v.grad)v = (A^2 pi / 2)(sin 2pi x, sin 2pi y),
  // div 2 mu E = -mu lam v, hyperstress load = -nu lam^2 / 2 v with lam = 2 pi^2.
  Scenario sc = base_scenario(12);
  sc.material.p = 2.0;
  sc.material.rho = 1.3;
  const double A = 0.7;
  const double lam = 2.0 * kPi * kPi;
  const MaterialParams m = sc.material;
  sc.v0 = stream_function_velocity(sc.domain, A);
  sc.body_force = [=](double, double x, double y) {
    const Vec2 v(A * std::sin(kPi * x) * std::cos(kPi * y), -A * std::cos(kPi * x) * std::sin(kPi * y));
    const Vec2 conv(0.5 * A * A * kPi * std::sin(2.0 * kPi * x), 0.5 * A * A * kPi * std::sin(2.0 * kPi * y));
    return Vec2(m.rho * conv + (m.visc_mu * lam + 0.5 * m.nu * lam * lam) * v);
  };
  const Dynamics dyn(sc);
  const VelocityCoeffs r = dyn.momentum_rhs(dyn.initial_state());
  CHECK(r[0].cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r[1].cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("deformation growth bound along a trajectory") {
  Scenario sc = base_scenario(16);
  sc.v0 = stream_function_velocity(sc.domain, 1.0);
  const Dynamics dyn(sc);
  SimState s = dyn.initial_state();
  for (int n = 0; n < 100; ++n) {
    if (n % 10 == 0) {
      const DeformationCoeffs r = dyn.transport_rhs(s);
      double growth = 0.0, f2 = 0.0;
      for (int c = 0; c < 4; ++c) {
        growth += s.F[c].cwiseProduct(r[c]).sum();
        f2 += s.F[c].squaredNorm();
      }
      const double gv = dyn.diagnostics(s).max_grad_v;
      CHECK(growth <= 1.5 * gv * f2);
    }
    s = dyn.step(s, 2e-3);
  }
}
