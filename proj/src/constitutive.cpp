#include "kvflow/constitutive.hpp"

#include "kvflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kvflow {

namespace {

constexpr int kDim = 2;

// |E|^{3/2}, smoothed at E = 0, and its derivative with respect to E.
double smoothed_power(const Mat2& E) {
  return std::pow(E.squaredNorm() + kNormSmoothing * kNormSmoothing, 0.75);
}
Mat2 smoothed_power_derivative(const Mat2& E) {
  return 1.5 * std::pow(E.squaredNorm() + kNormSmoothing * kNormSmoothing, -0.25) * E;
}

Mat2 cofactor(const Mat2& F) {
  Mat2 c;
  c << F(1, 1), -F(1, 0), -F(0, 1), F(0, 0);
  return c;
}

void check_custom(const StoredEnergyModel& m) {
  if (!m.custom_value || !m.custom_derivative) {
    throw ConfigError("custom stored energy requires value and derivative callables");
  }
}

}  // namespace

void MaterialParams::validate(bool strict_exponent) const {
  auto require = [](bool ok, const char* rule) {
    if (!ok) throw ConfigError(std::string("material parameter violates ") + rule);
  };
  require(rho > 0.0 && std::isfinite(rho), "rho > 0");
  require(nu > 0.0 && std::isfinite(nu), "nu > 0");
  require(visc_mu > 0.0, "positive definite viscosity: visc_mu > 0");
  require(visc_lambda >= 0.0, "positive definite viscosity: visc_lambda >= 0");
  if (strict_exponent) {
    require(p > kDim, "p > d (d = 2)");
  } else {
    require(p >= kDim, "p >= 2");
  }
  require(bulk > 0.0, "K > 0");
  require(shear > 0.0, "G > 0");
  require(eta >= 0.0, "eta >= 0");
  require(eps >= 0.0, "eps >= 0");
}

std::string to_string(EnergyKind k) {
  switch (k) {
    case EnergyKind::regularized_svk: return "regularized-svk";
    case EnergyKind::svk: return "svk";
    case EnergyKind::custom: return "custom";
  }
  return "?";
}

EnergyKind energy_kind_from_string(const std::string& s) {
  if (s == "regularized-svk") return EnergyKind::regularized_svk;
  if (s == "svk") return EnergyKind::svk;
  if (s == "custom") return EnergyKind::custom;
  throw ConfigError("unknown stored energy kind '" + s + "'");
}

StoredEnergyModel StoredEnergyModel::from(const MaterialParams& m, EnergyKind kind) {
  StoredEnergyModel s;
  s.kind = kind;
  s.bulk = m.bulk;
  s.shear = m.shear;
  s.eta = kind == EnergyKind::svk ? 0.0 : m.eta;
  return s;
}

Mat2 green_lagrange(const Mat2& F) { return 0.5 * (F.transpose() * F - Mat2::Identity()); }

double stored_energy(const Mat2& F, const StoredEnergyModel& m) {
  double value = 0.0;
  if (m.kind == EnergyKind::custom) {
    check_custom(m);
    value = m.custom_value(F);
  } else {
    const Mat2 E = green_lagrange(F);
    const double eta = m.kind == EnergyKind::svk ? 0.0 : m.eta;
    const double tr = E.trace();
    const Mat2 sph = (tr / kDim) * Mat2::Identity();
    const Mat2 dev = E - sph;
    const double s = eta > 0.0 ? smoothed_power(E) : 0.0;
    value = kDim * m.bulk * sph.squaredNorm() / (2.0 + eta * s) +
            m.shear * dev.squaredNorm() / (1.0 + eta * s);
  }
  if (m.det_penalty > 0.0) {
    const double j = 1.0 - F.determinant();
    value += m.det_penalty * j * j;
  }
  return value;
}

Mat2 stored_energy_derivative(const Mat2& F, const StoredEnergyModel& m) {
  Mat2 result = Mat2::Zero();
  if (m.kind == EnergyKind::custom) {
    check_custom(m);
    result = m.custom_derivative(F);
  } else {
    // phi = K tr^2 / (2 + eta s) + G |dev|^2 / (1 + eta s), s = |E|^{3/2}; phi' = F dphi/dE.
    const Mat2 E = green_lagrange(F);
    const double eta = m.kind == EnergyKind::svk ? 0.0 : m.eta;
    const double tr = E.trace();
    const Mat2 dev = E - (tr / kDim) * Mat2::Identity();
    const double a = tr * tr;
    const double b = dev.squaredNorm();
    Mat2 dphi_dE;
    if (eta > 0.0) {
      const double s = smoothed_power(E);
      const Mat2 ds = smoothed_power_derivative(E);
      const double d1 = 2.0 + eta * s;
      const double d2 = 1.0 + eta * s;
      dphi_dE = m.bulk * (2.0 * tr * Mat2::Identity()) / d1 - m.bulk * a * eta * ds / (d1 * d1) +
                m.shear * 2.0 * dev / d2 - m.shear * b * eta * ds / (d2 * d2);
    } else {
      dphi_dE = m.bulk * tr * Mat2::Identity() + 2.0 * m.shear * dev;
    }
    result = F * dphi_dE;
  }
  if (m.det_penalty > 0.0) {
    result += -2.0 * m.det_penalty * (1.0 - F.determinant()) * cofactor(F);
  }
  return result;
}

Mat2 cauchy_stress_conservative(const Mat2& F, const StoredEnergyModel& m) {
  return stored_energy_derivative(F, m) * F.transpose() + stored_energy(F, m) * Mat2::Identity();
}

double growth_constant(const StoredEnergyModel& m) {
  if (m.kind != EnergyKind::regularized_svk || !(m.eta > 0.0) || m.det_penalty > 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  // With e = |E|:  tr^2 <= 2 e^2, |dev|^2 <= e^2, |d s/dE| <= 1.5 e^{1/2}, s >= e^{3/2},
  // |F|^2 = 2 tr E + 2 <= 2 sqrt(2) e + 2.
  //   phi  <= min((K + G) e^2, (2K + G) e^{1/2} / eta)
  //   |dphi/dE| <= min(2K e + 2G e + (0.75K + 1.5G) eta e^{5/2},
  //                    (7K + 3.5G) / (eta e^{1/2}))
  // phi <= l(1 + |F|) follows from e^{1/2} <= (1 + |F|) since 2e <= |F|^2 + sqrt(2).
  const double K = m.bulk;
  const double G = m.shear;
  const double eta = m.eta;
  double l_phi = (2.0 * K + G) / eta;
  double l_deriv = 0.0;
  for (int i = 0; i <= 4000; ++i) {
    const double e = std::pow(10.0, -6.0 + 14.0 * i / 4000.0);
    const double small = 2.0 * (K + G) * e + (0.75 * K + 1.5 * G) * eta * std::pow(e, 2.5);
    const double large = (7.0 * K + 3.5 * G) / (eta * std::sqrt(e));
    const double fnorm = std::sqrt(2.0 * std::sqrt(2.0) * e + 2.0);
    l_deriv = std::max(l_deriv, fnorm * std::min(small, large));
  }
  // The sampled supremum of a continuous piecewise bound; pad for the grid spacing.
  return std::max(l_phi, 1.01 * l_deriv);
}

Mat2 viscous_stress_local(const Mat2& strain_rate, const MaterialParams& m) {
  return m.visc_lambda * strain_rate.trace() * Mat2::Identity() + 2.0 * m.visc_mu * strain_rate;
}

TensorField strain_rate(const Basis& basis, const TensorField& v) {
  if (v.rank != 1 || v.size() != 2) throw ConfigError("strain_rate expects a velocity field");
  const TensorField g = gradient(basis, v);  // (d_x v1, d_y v1, d_x v2, d_y v2)
  const Family f12 = g.families[1];
  if (f12 != g.families[2]) throw ConfigError("velocity components have inconsistent parity");
  const Coeffs e12 = 0.5 * (g.coeffs[1] + g.coeffs[2]);
  return TensorField::from_coeffs(2, {g.families[0], f12, f12, g.families[3]},
                                  {g.coeffs[0], e12, e12, g.coeffs[3]});
}

TensorField viscous_stress(const Basis& basis, const TensorField& strain, const MaterialParams& m) {
  const TensorField e = transform_forward(basis, strain);
  if (e.families[0] == e.families[3]) {
    // In-span linear map: stays exact in coefficient space.
    const Coeffs tr = e.coeffs[0] + e.coeffs[3];
    return TensorField::from_coeffs(
        2, e.families,
        {m.visc_lambda * tr + 2.0 * m.visc_mu * e.coeffs[0], 2.0 * m.visc_mu * e.coeffs[1],
         2.0 * m.visc_mu * e.coeffs[2], m.visc_lambda * tr + 2.0 * m.visc_mu * e.coeffs[3]});
  }
  const TensorField eg = transform_inverse(basis, e);
  std::vector<Grid> out(4);
  const Grid tr = eg.grids[0] + eg.grids[3];
  out[0] = m.visc_lambda * tr + 2.0 * m.visc_mu * eg.grids[0];
  out[1] = 2.0 * m.visc_mu * eg.grids[1];
  out[2] = 2.0 * m.visc_mu * eg.grids[2];
  out[3] = m.visc_lambda * tr + 2.0 * m.visc_mu * eg.grids[3];
  return transform_forward(basis, TensorField::from_grids(2, e.families, std::move(out)));
}

Grid strain_gradient_norm(const Basis& basis, const TensorField& strain) {
  const TensorField g = transform_inverse(basis, gradient(basis, strain));
  Grid sq = Grid::Zero(basis.mx(), basis.my());
  for (const Grid& c : g.grids) sq += c.cwiseAbs2();
  return sq.cwiseSqrt();
}

TensorField hyperstress(const Basis& basis, const TensorField& strain, const MaterialParams& m) {
  const TensorField g = transform_inverse(basis, gradient(basis, strain));
  Grid sq = Grid::Zero(basis.mx(), basis.my());
  for (const Grid& c : g.grids) sq += c.cwiseAbs2();
  // |grad E|^{p-2} with the continuous extension 0 at the origin for p > 2.
  Grid coef = sq.unaryExpr([&](double s) {
    if (m.p == 2.0) return m.nu;
    return s > 0.0 ? m.nu * std::pow(s, 0.5 * (m.p - 2.0)) : 0.0;
  });
  std::vector<Grid> out;
  out.reserve(g.size());
  for (const Grid& c : g.grids) out.push_back(coef.cwiseProduct(c));
  return transform_forward(basis, TensorField::from_grids(3, g.families, std::move(out)));
}

}  // namespace kvflow
