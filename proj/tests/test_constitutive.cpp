#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kvflow/constitutive.hpp"
#include "kvflow/errors.hpp"

#include <cmath>
#include <random>

using namespace kvflow;

namespace {

Mat2 random_F(std::mt19937_64& rng, double max_norm = 3.0, double min_det = 0.1) {
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (;;) {
    Mat2 F;
    F << 1.0 + u(rng), u(rng), u(rng), 1.0 + u(rng);
    if (F.norm() <= max_norm && F.determinant() > min_det) return F;
  }
}

Mat2 rotation(double th) {
  Mat2 R;
  R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  return R;
}

Mat2 fd_derivative(const Mat2& F, const StoredEnergyModel& m, double h = 1e-6) {
  Mat2 d;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      Mat2 P = F, M = F;
      P(i, j) += h;
      M(i, j) -= h;
      d(i, j) = (stored_energy(P, m) - stored_energy(M, m)) / (2.0 * h);
    }
  }
  return d;
}

StoredEnergyModel model(double eta, double K = 1.0, double G = 1.0) {
  MaterialParams p;
  p.bulk = K;
  p.shear = G;
  p.eta = eta;
  return StoredEnergyModel::from(p, eta > 0.0 ? EnergyKind::regularized_svk : EnergyKind::svk);
}

}  // namespace

TEST_CASE("hand-computed stored energy and stress at diag(2, 1)") {
  Mat2 F = Mat2::Zero();
  F(0, 0) = 2.0;
  F(1, 1) = 1.0;
  // E = diag(3/2, 0): |sph|^2 = |dev|^2 = 9/8.
  const StoredEnergyModel svk = model(0.0);
  CHECK(stored_energy(F, svk) == doctest::Approx(2.25).epsilon(1e-15));
  const Mat2 T = cauchy_stress_conservative(F, svk);
  CHECK(T(0, 0) == doctest::Approx(14.25).epsilon(1e-15));
  CHECK(T(1, 1) == doctest::Approx(2.25).epsilon(1e-15));
  CHECK(T(0, 1) == doctest::Approx(0.0));

  const double eta = 0.1;
  const double s = std::pow(1.5, 1.5);
  CHECK(stored_energy(F, model(eta)) ==
        doctest::Approx(2.25 / (2.0 + eta * s) + 1.125 / (1.0 + eta * s)).epsilon(1e-12));
}

TEST_CASE("reference configuration is stress free") {
  for (double eta : {0.0, 0.1, 1.0}) {
    const StoredEnergyModel m = model(eta);
    CHECK(stored_energy(Mat2::Identity(), m) == doctest::Approx(0.0));
    CHECK(cauchy_stress_conservative(Mat2::Identity(), m).norm() < 1e-15);
  }
}

TEST_CASE("analytic derivative matches central differences") {
  std::mt19937_64 rng(21);
  for (double eta : {0.0, 0.1, 1.0}) {
    const StoredEnergyModel m = model(eta, 1.3, 0.7);
    for (int k = 0; k < 100; ++k) {
      const Mat2 F = random_F(rng);
      const Mat2 fd = fd_derivative(F, m);
      const Mat2 an = stored_energy_derivative(F, m);
      CHECK((an - fd).norm() <= 1e-5 * fd.norm());
    }
  }
  StoredEnergyModel pen = model(0.1);
  pen.det_penalty = 4.0;
  const Mat2 F = random_F(rng);
  CHECK((stored_energy_derivative(F, pen) - fd_derivative(F, pen)).norm() <= 1e-5 * fd_derivative(F, pen).norm());
}

TEST_CASE("frame indifference and stress symmetry") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
  for (double eta : {0.0, 0.1}) {
    const StoredEnergyModel m = model(eta);
    for (int k = 0; k < 100; ++k) {
      const Mat2 F = random_F(rng);
      const double phi = stored_energy(F, m);
      CHECK(std::abs(stored_energy(rotation(ang(rng)) * F, m) - phi) < 1e-12 * (1.0 + phi));
      const Mat2 T = cauchy_stress_conservative(F, m);
      CHECK(std::abs(T(0, 1) - T(1, 0)) < 1e-10 * (1.0 + T.norm()));
    }
  }
}

TEST_CASE("growth bound holds on samples") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> lg(-2.0, 2.5);
  const StoredEnergyModel m = model(0.1, 1.0, 1.0);
  const double l = growth_constant(m);
  REQUIRE(std::isfinite(l));
  for (int k = 0; k < 2000; ++k) {
    Mat2 F;
    F << u(rng), u(rng), u(rng), u(rng);
    F *= std::pow(10.0, lg(rng));
    CHECK(stored_energy(F, m) <= l * (1.0 + F.norm()));
    CHECK(stored_energy_derivative(F, m).norm() <= l);
  }
  CHECK(std::isinf(growth_constant(model(0.0))));
}

TEST_CASE("parameter validation") {
  MaterialParams p;
  CHECK_NOTHROW(p.validate());
  p.p = 2.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  CHECK_NOTHROW(p.validate(false));
  p.p = 3.0;
  p.visc_mu = 0.0;
  CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("visc_mu"), ConfigError);
  CHECK_THROWS_AS(energy_kind_from_string("neo"), ConfigError);
  CHECK(energy_kind_from_string(to_string(EnergyKind::svk)) == EnergyKind::svk);
}

TEST_CASE("viscous and hyperstress fields") {
  const Basis b({1.0, 1.0}, 8, 8);
  MaterialParams m;
  m.visc_lambda = 0.3;
  m.visc_mu = 0.2;
  m.nu = 0.01;
  m.p = 3.0;
  Coeffs a = Coeffs::Zero(8, 8), c = Coeffs::Zero(8, 8);
  a(2, 1) = 0.7;
  c(1, 3) = -0.4;
  const TensorField v = TensorField::from_coeffs(1, {Family::sc, Family::cs}, {a, c});
  const TensorField e = strain_rate(b, v);
  const TensorField sv = transform_inverse(b, viscous_stress(b, e, m));
  const TensorField eg = transform_inverse(b, e);
  const int mi = 5, mj = 9;
  Mat2 E;
  E << eg.grids[0](mi, mj), eg.grids[1](mi, mj), eg.grids[2](mi, mj), eg.grids[3](mi, mj);
  const Mat2 S = viscous_stress_local(E, m);
  CHECK(sv.grids[0](mi, mj) == doctest::Approx(S(0, 0)).epsilon(1e-12));
  CHECK(sv.grids[1](mi, mj) == doctest::Approx(S(0, 1)).epsilon(1e-12));
  CHECK(S(0, 0) == doctest::Approx(0.3 * E.trace() + 0.4 * E(0, 0)));

  // p = 2 makes the hyperstress linear: nu grad E exactly.
  MaterialParams lin = m;
  lin.p = 2.0;
  const TensorField h = hyperstress(b, e, lin);
  const TensorField ge = gradient(b, e);
  for (std::size_t k = 0; k < 8; ++k) {
    CHECK((transform_forward(b, h).coeffs[k] - lin.nu * ge.coeffs[k]).norm() < 1e-13);
  }
  // p = 3: pointwise nu |grad E| grad E before projection.
  const Grid n = strain_gradient_norm(b, e);
  const TensorField geg = transform_inverse(b, ge);
  double sq = 0.0;
  for (std::size_t k = 0; k < 8; ++k) sq += std::pow(geg.grids[k](mi, mj), 2);
  CHECK(n(mi, mj) == doctest::Approx(std::sqrt(sq)).epsilon(1e-12));
}
