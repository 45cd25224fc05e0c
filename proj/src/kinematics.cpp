#include "kvflow/kinematics.hpp"

#include "kvflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace kvflow {

namespace {

constexpr std::array<double, 3> kGamma{8.0 / 15.0, 5.0 / 12.0, 3.0 / 4.0};
constexpr std::array<double, 3> kZeta{0.0, -17.0 / 60.0, -5.0 / 12.0};
constexpr std::array<double, 3> kStageTime{0.0, 8.0 / 15.0, 2.0 / 3.0};

void check_inside(const Domain& d, const Vec2& x, double t) {
  const double tol = 1e-8 * std::min(d.lx, d.ly);
  if (!(x.x() >= -tol && x.x() <= d.lx + tol && x.y() >= -tol && x.y() <= d.ly + tol)) {
    std::ostringstream os;
    os << "particle path left the domain at t = " << t << " (x = " << x.x() << ", " << x.y() << ")";
    throw NumericalError(os.str(), t);
  }
}

}  // namespace

PointVelocity spectral_point_velocity(const Basis& basis, VelocityProvider coeffs) {
  return [&basis, coeffs = std::move(coeffs)](double t, const Vec2& x) {
    const VelocityCoeffs c = coeffs(t);
    const auto [v1, g1] = basis.evaluate_with_gradient(c[0], Family::sc, x.x(), x.y());
    const auto [v2, g2] = basis.evaluate_with_gradient(c[1], Family::cs, x.x(), x.y());
    VelocitySample s;
    s.v = Vec2(v1, v2);
    s.grad.row(0) = g1.transpose();
    s.grad.row(1) = g2.transpose();
    return s;
  };
}

ParticlePath characteristics_oracle(const PointVelocity& v, const Domain& domain, const Vec2& x0,
                                    const Mat2& F0, double t0, double t_end, double dt_ode,
                                    bool record_all) {
  if (!(dt_ode > 0.0)) throw ConfigError("dt_ode must be positive");
  ParticlePath path;
  path.x0 = x0;
  Vec2 x = x0;
  Mat2 F = F0;
  double t = t0;
  path.samples.push_back({t, x, F});
  check_inside(domain, x, t);
  const auto n = static_cast<long>(std::ceil((t_end - t0) / dt_ode - 1e-12));
  for (long s = 0; s < n; ++s) {
    const double h = std::min(dt_ode, t_end - t);
    const VelocitySample k1 = v(t, x);
    const Mat2 kF1 = k1.grad * F;
    const Vec2 x2 = x + 0.5 * h * k1.v;
    const Mat2 F2 = F + 0.5 * h * kF1;
    const VelocitySample k2 = v(t + 0.5 * h, x2);
    const Mat2 kF2 = k2.grad * F2;
    const Vec2 x3 = x + 0.5 * h * k2.v;
    const Mat2 F3 = F + 0.5 * h * kF2;
    const VelocitySample k3 = v(t + 0.5 * h, x3);
    const Mat2 kF3 = k3.grad * F3;
    const Vec2 x4 = x + h * k3.v;
    const Mat2 F4 = F + h * kF3;
    const VelocitySample k4 = v(t + h, x4);
    const Mat2 kF4 = k4.grad * F4;
    x += h / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
    F += h / 6.0 * (kF1 + 2.0 * kF2 + 2.0 * kF3 + kF4);
    t = (s + 1 == n) ? t_end : t + h;
    check_inside(domain, x, t);
    if (!x.allFinite() || !F.allFinite()) throw NumericalError("non-finite particle state", t);
    if (record_all || s + 1 == n) path.samples.push_back({t, x, F});
  }
  return path;
}

void VelocityHistory::append(double t, VelocityCoeffs v, VelocityCoeffs rate) {
  if (!times_.empty() && !(t > times_.back())) {
    throw ConfigError("velocity history times must increase");
  }
  times_.push_back(t);
  values_.push_back(std::move(v));
  rates_.push_back(std::move(rate));
}

VelocityCoeffs VelocityHistory::at(double t) const {
  if (times_.empty()) throw ConfigError("velocity history is empty");
  const double span = std::max(1.0, std::abs(times_.back()));
  const double tol = 1e-12 * span;
  if (t < times_.front() - tol || t > times_.back() + tol) {
    throw ConfigError("velocity history queried outside its range");
  }
  if (times_.size() == 1) return values_.front();
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  std::size_t k = static_cast<std::size_t>(std::distance(times_.begin(), it));
  k = std::clamp<std::size_t>(k, 1, times_.size() - 1);
  const double ta = times_[k - 1];
  const double h = times_[k] - ta;
  const double s = std::clamp((t - ta) / h, 0.0, 1.0);
  const double h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
  const double h10 = s * (1.0 - s) * (1.0 - s);
  const double h01 = s * s * (3.0 - 2.0 * s);
  const double h11 = s * s * (s - 1.0);
  VelocityCoeffs out;
  for (int c = 0; c < 2; ++c) {
    out[c] = h00 * values_[k - 1][c] + h10 * h * rates_[k - 1][c] + h01 * values_[k][c] +
             h11 * h * rates_[k][c];
  }
  return out;
}

Grid determinant_grid(const Dynamics& dyn, const DeformationCoeffs& F) {
  const std::array<Grid, 4> g = dyn.deformation_grids(F);
  return g[0].cwiseProduct(g[3]) - g[1].cwiseProduct(g[2]);
}

double det_transport_defect(const Dynamics& dyn, const SimState& s, const Grid& ddt_det) {
  const Basis& b = dyn.basis();
  const Grid det = determinant_grid(dyn, s.F);
  // det F of cc/ss components is a cc field; its projection is exact.
  const Coeffs dc = b.project(det, Family::cc);
  const Grid dx = b.synthesize(b.derivative(dc, Family::cc, 0), Family::sc);
  const Grid dy = b.synthesize(b.derivative(dc, Family::cc, 1), Family::cs);
  const VelocityCoeffs v = dyn.velocity_at(s, s.t);
  const std::array<Grid, 2> vg = dyn.velocity_grids(v);
  const Grid div = b.synthesize(b.derivative(v[0], Family::sc, 0) + b.derivative(v[1], Family::cs, 1),
                                Family::cc);
  const Grid r = ddt_det + vg[0].cwiseProduct(dx) + vg[1].cwiseProduct(dy) - div.cwiseProduct(det);
  return std::sqrt(b.integrate(r.cwiseAbs2()));
}

std::vector<DefectSample> det_transport_check(const Dynamics& dyn,
                                              const std::vector<SimState>& snapshots) {
  std::vector<DefectSample> out;
  if (snapshots.size() < 3) return out;
  for (std::size_t n = 1; n + 1 < snapshots.size(); ++n) {
    const double dt = snapshots[n + 1].t - snapshots[n - 1].t;
    const Grid ddt = (determinant_grid(dyn, snapshots[n + 1].F) - determinant_grid(dyn, snapshots[n - 1].F)) / dt;
    out.push_back({snapshots[n].t, det_transport_defect(dyn, snapshots[n], ddt)});
  }
  return out;
}

ReturnMapState return_map_identity(const Basis& basis, double t0) {
  return {t0, Coeffs::Zero(basis.nx(), basis.ny()), Coeffs::Zero(basis.nx(), basis.ny())};
}

std::array<Coeffs, 2> return_map_rate(const Basis& b, const ReturnMapState& w,
                                      const VelocityCoeffs& v) {
  const Grid v1 = b.synthesize(v[0], Family::sc);
  const Grid v2 = b.synthesize(v[1], Family::cs);
  const std::array<const Coeffs*, 2> wc{&w.w1, &w.w2};
  std::array<Coeffs, 2> out;
  for (int i = 0; i < 2; ++i) {
    const Family f = kVelocityFamilies[i];
    const Grid wx = b.synthesize(b.derivative(*wc[i], f, 0), flip(f, 0));
    const Grid wy = b.synthesize(b.derivative(*wc[i], f, 1), flip(f, 1));
    // (v.grad) x = v, and v is already in the family of w_i.
    out[i] = b.project(-(v1.cwiseProduct(wx) + v2.cwiseProduct(wy)), f) - v[i];
    out[i] = out[i].cwiseProduct(b.mask(f));
  }
  return out;
}

ReturnMapState return_map_step(const Basis& basis, const ReturnMapState& w,
                               const VelocityProvider& v, double dt) {
  ReturnMapState u = w;
  std::array<Coeffs, 2> prev;
  for (int k = 0; k < 3; ++k) {
    const double tk = w.t + kStageTime[k] * dt;
    const std::array<Coeffs, 2> r = return_map_rate(basis, u, v(tk));
    u.w1 += dt * kGamma[k] * r[0];
    u.w2 += dt * kGamma[k] * r[1];
    if (k > 0) {
      u.w1 += dt * kZeta[k] * prev[0];
      u.w2 += dt * kZeta[k] * prev[1];
    }
    prev = r;
  }
  u.t = w.t + dt;
  if (!u.w1.allFinite() || !u.w2.allFinite()) {
    throw NumericalError("non-finite return map", u.t);
  }
  return u;
}

ReturnMapDefect return_map_defect(const Basis& b, const ReturnMapState& w,
                                  const DeformationCoeffs& F, const TensorFn& F0) {
  // grad xi = I + grad w, with the parity layout of F.
  const Grid g11 = 1.0 + b.synthesize(b.derivative(w.w1, Family::sc, 0), Family::cc).array();
  const Grid g12 = b.synthesize(b.derivative(w.w1, Family::sc, 1), Family::ss);
  const Grid g21 = b.synthesize(b.derivative(w.w2, Family::cs, 0), Family::ss);
  const Grid g22 = 1.0 + b.synthesize(b.derivative(w.w2, Family::cs, 1), Family::cc).array();
  std::array<Grid, 4> Fg;
  for (int c = 0; c < 4; ++c) Fg[c] = b.synthesize(F[c], kDeformationFamilies[c]);
  ReturnMapDefect out;
  const Grid det = g11.cwiseProduct(g22) - g12.cwiseProduct(g21);
  out.min_det = det.minCoeff();
  if (!(out.min_det > 0.0)) {
    out.singular = true;
    out.defect = std::numeric_limits<double>::infinity();
    return out;
  }
  Grid r11, r12, r21, r22;
  if (!F0) {
    const Grid one = Grid::Ones(b.mx(), b.my());
    r11 = Fg[0].cwiseProduct(g11) + Fg[1].cwiseProduct(g21) - one;
    r12 = Fg[0].cwiseProduct(g12) + Fg[1].cwiseProduct(g22);
    r21 = Fg[2].cwiseProduct(g11) + Fg[3].cwiseProduct(g21);
    r22 = Fg[2].cwiseProduct(g12) + Fg[3].cwiseProduct(g22) - one;
  } else {
    // Along paths F = D chi F0(X) and grad xi = (D chi)^{-1}, so (grad xi) F = F0(xi).
    const Grid w1 = b.synthesize(w.w1, Family::sc);
    const Grid w2 = b.synthesize(w.w2, Family::cs);
    const Domain& d = b.domain();
    std::array<Grid, 4> f0;
    for (Grid& g : f0) g.resize(b.mx(), b.my());
    for (int j = 0; j < b.my(); ++j) {
      for (int i = 0; i < b.mx(); ++i) {
        const Mat2 m = F0(std::clamp(b.nodes(0)(i) + w1(i, j), 0.0, d.lx),
                          std::clamp(b.nodes(1)(j) + w2(i, j), 0.0, d.ly));
        f0[0](i, j) = m(0, 0);
        f0[1](i, j) = m(0, 1);
        f0[2](i, j) = m(1, 0);
        f0[3](i, j) = m(1, 1);
      }
    }
    r11 = g11.cwiseProduct(Fg[0]) + g12.cwiseProduct(Fg[2]) - f0[0];
    r12 = g11.cwiseProduct(Fg[1]) + g12.cwiseProduct(Fg[3]) - f0[1];
    r21 = g21.cwiseProduct(Fg[0]) + g22.cwiseProduct(Fg[2]) - f0[2];
    r22 = g21.cwiseProduct(Fg[1]) + g22.cwiseProduct(Fg[3]) - f0[3];
  }
  const Grid sq = r11.cwiseAbs2() + r12.cwiseAbs2() + r21.cwiseAbs2() + r22.cwiseAbs2();
  out.defect = std::sqrt(b.integrate(sq));
  return out;
}

ReturnMapResult return_map_evolve(const Basis& basis, const VelocityProvider& v, double t0,
                                  double t_end, double dt) {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  ReturnMapResult res;
  res.final = return_map_identity(basis, t0);
  res.times.push_back(t0);
  const auto n = static_cast<long>(std::ceil((t_end - t0) / dt - 1e-9));
  for (long s = 0; s < n; ++s) {
    const double h = std::min(dt, t_end - res.final.t);
    res.final = return_map_step(basis, res.final, v, h);
    if (s + 1 == n) res.final.t = t_end;
    res.times.push_back(res.final.t);
  }
  return res;
}

}  // namespace kvflow
