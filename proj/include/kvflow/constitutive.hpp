#pragma once

#include "kvflow/spectral.hpp"

#include <functional>
#include <string>

namespace kvflow {

struct MaterialParams {
  double rho = 1.0;          ///< mass density
  double visc_lambda = 0.1;  ///< D E = visc_lambda tr(E) I + 2 visc_mu E
  double visc_mu = 0.1;
  double nu = 1e-3;  ///< hyperviscosity
  double p = 3.0;    ///< hyperstress exponent, p > 2
  double bulk = 1.0;   ///< K
  double shear = 1.0;  ///< G
  double eta = 0.1;    ///< growth regularisation
  double eps = 0.0;    ///< F-transport diffusion

  /// Throws ConfigError naming the violated rule. With `strict_exponent`
  /// the hyperstress exponent must exceed the dimension (p > 2).
  void validate(bool strict_exponent = true) const;
  bool operator==(const MaterialParams&) const = default;
};

enum class EnergyKind { regularized_svk, svk, custom };

std::string to_string(EnergyKind k);
EnergyKind energy_kind_from_string(const std::string& s);

/// Stored energy phi(F) per actual volume.
struct StoredEnergyModel {
  EnergyKind kind = EnergyKind::regularized_svk;
  double bulk = 1.0;
  double shear = 1.0;
  double eta = 0.1;
  /// Additive K_pen (1 - det F)^2 used by the elastic incompressibility sweep.
  double det_penalty = 0.0;
  /// Only for EnergyKind::custom.
  std::function<double(const Mat2&)> custom_value;
  std::function<Mat2(const Mat2&)> custom_derivative;

  static StoredEnergyModel from(const MaterialParams& m,
                                EnergyKind kind = EnergyKind::regularized_svk);
};

/// Smoothing of |E| in |E|^{3/2}: (|E|^2 + delta^2)^{3/4}.
inline constexpr double kNormSmoothing = 1e-12;

Mat2 green_lagrange(const Mat2& F);
double stored_energy(const Mat2& F, const StoredEnergyModel& m);
/// d phi / d F.
Mat2 stored_energy_derivative(const Mat2& F, const StoredEnergyModel& m);
/// T = phi'(F) F^T + phi(F) I.
Mat2 cauchy_stress_conservative(const Mat2& F, const StoredEnergyModel& m);

/// Constant l with phi(F) <= l (1 + |F|) and |phi'(F)| <= l, valid for
/// the regularised model with eta > 0 (infinite otherwise).
double growth_constant(const StoredEnergyModel& m);

/// D E for a symmetric strain rate.
Mat2 viscous_stress_local(const Mat2& strain_rate, const MaterialParams& m);

// Field versions. Velocity fields are rank 1 with families (sc, cs).
TensorField strain_rate(const Basis& basis, const TensorField& v);
TensorField viscous_stress(const Basis& basis, const TensorField& strain, const MaterialParams& m);
/// nu |grad E|^{p-2} grad E evaluated pointwise on the grid and projected;
/// rank 3, component (i, j, k) at index 4*i + 2*j + k, holding d_k E_ij.
TensorField hyperstress(const Basis& basis, const TensorField& strain, const MaterialParams& m);
/// Frobenius norm |grad E| on the grid.
Grid strain_gradient_norm(const Basis& basis, const TensorField& strain);

}  // namespace kvflow
