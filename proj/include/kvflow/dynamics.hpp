#pragma once

// Semi-discrete Galerkin system for the velocity / deformation-gradient
// formulation and its IMEX time integrator.
//
// Unknowns: velocity v = (v1, v2) with v1 in the sc family and v2 in the cs
// family (so v.n = 0 on the boundary), and the deformation gradient F with
// diagonal entries in cc and off-diagonal entries in ss. These parities are
// exactly the ones the transport equation preserves for velocities of this
// form, so every product below stays inside its family.

#include "kvflow/constitutive.hpp"
#include "kvflow/spectral.hpp"

#include <array>
#include <functional>
#include <string>

namespace kvflow {

inline constexpr std::array<Family, 2> kVelocityFamilies{Family::sc, Family::cs};
/// Row-major F11, F12, F21, F22.
inline constexpr std::array<Family, 4> kDeformationFamilies{Family::cc, Family::ss, Family::ss,
                                                            Family::cc};

using VelocityCoeffs = std::array<Coeffs, 2>;
using DeformationCoeffs = std::array<Coeffs, 4>;

struct SimState {
  double t = 0.0;
  VelocityCoeffs v;
  DeformationCoeffs F;

  bool all_finite() const;
};

using VectorFn = std::function<Vec2(double x, double y)>;
using TensorFn = std::function<Mat2(double x, double y)>;
using LoadFn = std::function<Vec2(double t, double x, double y)>;
using VelocityProvider = std::function<VelocityCoeffs(double t)>;

struct IntegratorOptions {
  /// A spectral direction is treated implicitly once dt * rate exceeds this.
  double stiff_threshold = 1.0;
  /// Multiplier on the frozen-coefficient hyperviscosity bound.
  double shift_safety = 1.25;

  bool operator==(const IntegratorOptions&) const = default;
};

struct Scenario {
  std::string name = "scenario";
  Domain domain;
  int nx = 32;
  int ny = 32;
  int mx = 0;  ///< 0: dealiasing default
  int my = 0;
  MaterialParams material;
  StoredEnergyModel energy;
  VectorFn v0;  ///< empty: rest
  TensorFn F0;  ///< empty: identity
  LoadFn body_force;  ///< empty: none
  LoadFn traction;    ///< empty: none; must be tangential on the boundary
  double t_end = 1.0;
  double dt = 1e-3;
  IntegratorOptions integrator;
  /// When set, v is prescribed (kinematic run) and only F evolves.
  VelocityProvider prescribed_velocity;
};

/// Instantaneous energetic quantities of a state.
struct StateDiagnostics {
  double kinetic = 0.0;
  double stored = 0.0;
  double dissipation_rate = 0.0;  ///< int D E:E + nu |grad E|^p
  double external_power = 0.0;    ///< int f.v + int_Gamma g.v
  double max_speed = 0.0;
  double max_grad_v = 0.0;  ///< max over grid of the Frobenius norm of grad v
  double max_grad_strain = 0.0;
};

struct Rates {
  VelocityCoeffs v;
  DeformationCoeffs F;
  StateDiagnostics diagnostics;
};

/// Per-stage record of one step, for ledger quadrature.
struct StageRecord {
  double t = 0.0;
  double weight = 0.0;  ///< quadrature weight (fraction of dt)
  StateDiagnostics diagnostics;
};

struct StepReport {
  SimState next;
  std::array<StageRecord, 3> stages;
  double shift = 0.0;  ///< frozen hyperviscosity coefficient used for the implicit part
  int implicit_directions = 0;
  bool cfl_exceeded = false;
  /// Momentum rate at the start of the step (zero in kinematic runs).
  VelocityCoeffs v_rate_start;
};

class Dynamics {
 public:
  explicit Dynamics(Scenario scenario);

  const Basis& basis() const { return basis_; }
  const Scenario& scenario() const { return scenario_; }

  /// Projection of the initial data onto the Galerkin spaces.
  SimState initial_state() const;

  /// d v / dt of the Galerkin system.
  VelocityCoeffs momentum_rhs(const SimState& s) const;
  /// d F / dt of the Galerkin system (with eps-diffusion when eps > 0).
  DeformationCoeffs transport_rhs(const SimState& s) const;
  /// Both rates plus energetic diagnostics, in one pass.
  Rates rates(const SimState& s) const;
  StateDiagnostics diagnostics(const SimState& s) const { return rates(s).diagnostics; }

  /// Load of -rho (v.grad)v - (rho/2)(div v) v projected on the velocity modes.
  VelocityCoeffs convective_load(const VelocityCoeffs& v) const;
  /// Projection of -(v.grad)F on the deformation modes.
  DeformationCoeffs advective_transport(const VelocityCoeffs& v, const DeformationCoeffs& F) const;

  /// Frozen coefficient bounding the linearised hyperstress, given max |grad E|.
  double hyperviscosity_shift(double max_grad_strain) const;

  StepReport step_report(const SimState& s, double dt) const;
  SimState step(const SimState& s, double dt) const { return step_report(s, dt).next; }

  /// Velocity at time t: prescribed when the scenario says so, else from s.
  VelocityCoeffs velocity_at(const SimState& s, double t) const;

  /// Grid values of F (row-major components).
  std::array<Grid, 4> deformation_grids(const DeformationCoeffs& F) const;
  std::array<Grid, 2> velocity_grids(const VelocityCoeffs& v) const;

 private:
  struct ImplicitOperator {
    // Symmetric 2x2 block per mode (velocity) and a diagonal rate for F.
    Coeffs a11, a12, a22;
    Coeffs f_rate_cc, f_rate_ss;
    int directions = 0;
  };

  VelocityCoeffs linear_viscous_load(const VelocityCoeffs& v, double shift) const;
  ImplicitOperator build_implicit(double shift, double dt) const;
  VelocityCoeffs traction_load(double t) const;

  Scenario scenario_;
  Basis basis_;
  // Traction load tables: sine/cosine 1D modes at the Gauss nodes of each edge.
  Eigen::MatrixXd edge_sin_x_, edge_sin_y_;
  Eigen::RowVectorXd cos_y_bottom_, cos_y_top_, cos_x_left_, cos_x_right_;
};

/// Divergence-free field A (sin(pi x/Lx) cos(pi y/Ly), -(Ly/Lx) cos(pi x/Lx) sin(pi y/Ly)),
/// the curl of a single-mode stream function; v.n = 0 on every edge.
VectorFn stream_function_velocity(const Domain& d, double amplitude);

}  // namespace kvflow
