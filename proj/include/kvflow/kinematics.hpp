#pragma once

// Kinematic checks that do not go through the momentum equation.

#include "kvflow/dynamics.hpp"

#include <functional>
#include <vector>

namespace kvflow {

struct VelocitySample {
  Vec2 v = Vec2::Zero();
  Mat2 grad = Mat2::Zero();  ///< grad(i, k) = d_k v_i
};

using PointVelocity = std::function<VelocitySample(double t, const Vec2& x)>;

/// Point evaluation of spectral velocity coefficients supplied per time.
PointVelocity spectral_point_velocity(const Basis& basis, VelocityProvider coeffs);

struct PathSample {
  double t = 0.0;
  Vec2 x = Vec2::Zero();
  Mat2 F = Mat2::Identity();
};

struct ParticlePath {
  Vec2 x0 = Vec2::Zero();
  std::vector<PathSample> samples;  ///< first and last always present

  const PathSample& final() const { return samples.back(); }
};

/// RK4 on  x' = v(t, x),  F' = grad v(t, x) F.  Throws NumericalError when the
/// path leaves the closed domain by more than 1e-8 min(Lx, Ly).
ParticlePath characteristics_oracle(const PointVelocity& v, const Domain& domain, const Vec2& x0,
                                    const Mat2& F0, double t0, double t_end, double dt_ode,
                                    bool record_all = false);

/// Piecewise cubic Hermite interpolant of velocity coefficients in time.
class VelocityHistory {
 public:
  /// Times must be strictly increasing.
  void append(double t, VelocityCoeffs v, VelocityCoeffs rate);
  VelocityCoeffs at(double t) const;
  bool empty() const { return times_.empty(); }
  double t_begin() const { return times_.front(); }
  double t_end() const { return times_.back(); }
  std::size_t size() const { return times_.size(); }

 private:
  std::vector<double> times_;
  std::vector<VelocityCoeffs> values_;
  std::vector<VelocityCoeffs> rates_;
};

/// L2 defect of  d_t det F + v.grad det F - (div v) det F  at the interior
/// snapshots of an equally spaced trajectory (centered time differences).
struct DefectSample {
  double t = 0.0;
  double defect = 0.0;
};
std::vector<DefectSample> det_transport_check(const Dynamics& dyn,
                                              const std::vector<SimState>& snapshots);
/// det F on the grid.
Grid determinant_grid(const Dynamics& dyn, const DeformationCoeffs& F);
/// Same defect at one state, given a time-derivative estimate of det F on the grid.
double det_transport_defect(const Dynamics& dyn, const SimState& s, const Grid& ddt_det);

/// Return map xi = x + w with w1 in sc and w2 in cs (w.n = 0 on the boundary).
struct ReturnMapState {
  double t = 0.0;
  Coeffs w1;
  Coeffs w2;
};

ReturnMapState return_map_identity(const Basis& basis, double t0);
/// d w / dt = -P[(v.grad) w] - v.
std::array<Coeffs, 2> return_map_rate(const Basis& basis, const ReturnMapState& w,
                                      const VelocityCoeffs& v);
/// One low-storage RK3 step (same tableau as the dynamics integrator).
ReturnMapState return_map_step(const Basis& basis, const ReturnMapState& w,
                               const VelocityProvider& v, double dt);

struct ReturnMapDefect {
  /// ||F (grad xi) - I||_L2, or ||(grad xi) F - F0(xi)||_L2 when F0 is given;
  /// infinite when singular.
  double defect = 0.0;
  double min_det = 0.0;  ///< min over the grid of det grad xi
  bool singular = false;
};
/// An empty F0 stands for the identity.
ReturnMapDefect return_map_defect(const Basis& basis, const ReturnMapState& w,
                                  const DeformationCoeffs& F, const TensorFn& F0 = {});

struct ReturnMapResult {
  ReturnMapState final;
  std::vector<double> times;
};
/// Advance w from the identity over [t0, t_end] with step dt (last step shortened).
ReturnMapResult return_map_evolve(const Basis& basis, const VelocityProvider& v, double t0,
                                  double t_end, double dt);

}  // namespace kvflow
