#include "kvflow/dynamics.hpp"

#include "kvflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace kvflow {

namespace {

constexpr Family kCC = Family::cc;
constexpr Family kSC = Family::sc;
constexpr Family kCS = Family::cs;
constexpr Family kSS = Family::ss;

// Low-storage RK3: u_{k+1} = u_k + dt (gamma_k N(u_k) + zeta_k N(u_{k-1})).
constexpr std::array<double, 3> kGamma{8.0 / 15.0, 5.0 / 12.0, 3.0 / 4.0};
constexpr std::array<double, 3> kZeta{0.0, -17.0 / 60.0, -5.0 / 12.0};
constexpr std::array<double, 3> kStageTime{0.0, 8.0 / 15.0, 2.0 / 3.0};
// Equivalent Butcher weights of the scheme above.
constexpr std::array<double, 3> kStageWeight{0.25, 0.0, 0.75};

/// grad v components d_k v_i at index 2i + k; same parity layout as F.
constexpr std::array<Family, 4> kGradFamilies{kCC, kSS, kSS, kCC};

struct VelocityFields {
  std::array<Grid, 2> v;
  std::array<Coeffs, 4> grad;
  std::array<Grid, 4> grad_grid;
};

struct StrainGradient {
  // d_x E11, d_y E11, d_x E22, d_y E22, d_x E12, d_y E12
  std::array<Coeffs, 6> coeffs;
};
constexpr std::array<Family, 6> kStrainGradientFamilies{kSC, kCS, kSC, kCS, kCS, kSC};

VelocityFields velocity_fields(const Basis& b, const VelocityCoeffs& v) {
  VelocityFields out;
  for (int i = 0; i < 2; ++i) {
    const Family f = kVelocityFamilies[i];
    out.v[i] = b.synthesize(v[i], f);
    for (int k = 0; k < 2; ++k) {
      out.grad[2 * i + k] = b.derivative(v[i], f, k);
      out.grad_grid[2 * i + k] = b.synthesize(out.grad[2 * i + k], kGradFamilies[2 * i + k]);
    }
  }
  return out;
}

StrainGradient strain_gradient(const Basis& b, const std::array<Coeffs, 4>& grad) {
  const Coeffs e12 = 0.5 * (grad[1] + grad[2]);
  StrainGradient g;
  g.coeffs[0] = b.derivative(grad[0], kCC, 0);
  g.coeffs[1] = b.derivative(grad[0], kCC, 1);
  g.coeffs[2] = b.derivative(grad[3], kCC, 0);
  g.coeffs[3] = b.derivative(grad[3], kCC, 1);
  g.coeffs[4] = b.derivative(e12, kSS, 0);
  g.coeffs[5] = b.derivative(e12, kSS, 1);
  return g;
}

// Weak loads int sigma : grad(psi) for psi in the two velocity families.
VelocityCoeffs stress_load(const Basis& b, const Coeffs& s11, const Coeffs& s12, const Coeffs& s21,
                           const Coeffs& s22) {
  return {b.weak_pairing(s11, kSC, {0}) + b.weak_pairing(s12, kSC, {1}),
          b.weak_pairing(s21, kCS, {0}) + b.weak_pairing(s22, kCS, {1})};
}

// Weak loads int H : grad E(psi); H given by its six strain-gradient slots.
VelocityCoeffs hyper_load(const Basis& b, const std::array<Coeffs, 6>& h) {
  const Coeffs& h11x = h[0];
  const Coeffs& h11y = h[1];
  const Coeffs& h22x = h[2];
  const Coeffs& h22y = h[3];
  const Coeffs& h12x = h[4];
  const Coeffs& h12y = h[5];
  return {b.weak_pairing(h11x, kSC, {0, 0}) + b.weak_pairing(h11y + h12x, kSC, {0, 1}) +
              b.weak_pairing(h12y, kSC, {1, 1}),
          b.weak_pairing(h22y, kCS, {1, 1}) + b.weak_pairing(h12x, kCS, {0, 0}) +
              b.weak_pairing(h22x + h12y, kCS, {0, 1})};
}

double coeff_dot(const Coeffs& a, const Coeffs& b) { return a.cwiseProduct(b).sum(); }

void require_finite(const Coeffs& c, const char* term, double t) {
  if (!c.allFinite()) {
    std::ostringstream os;
    os << "non-finite value in " << term << " at t = " << t;
    throw NumericalError(os.str(), t);
  }
}

void require_finite(const VelocityCoeffs& c, const char* term, double t) {
  for (const Coeffs& x : c) require_finite(x, term, t);
}

}  // namespace

bool SimState::all_finite() const {
  if (!std::isfinite(t)) return false;
  for (const Coeffs& c : v) {
    if (!c.allFinite()) return false;
  }
  for (const Coeffs& c : F) {
    if (!c.allFinite()) return false;
  }
  return true;
}

Dynamics::Dynamics(Scenario scenario)
    : scenario_(std::move(scenario)),
      basis_(scenario_.domain, scenario_.nx, scenario_.ny, scenario_.mx, scenario_.my) {
  scenario_.material.validate(false);
  if (!(scenario_.dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(scenario_.t_end >= 0.0)) throw ConfigError("t_end must be nonnegative");
  const EdgeQuadrature& bottom = basis_.edge_quadrature(Edge::bottom);
  const EdgeQuadrature& left = basis_.edge_quadrature(Edge::left);
  Eigen::VectorXd xs(static_cast<Eigen::Index>(bottom.points.size()));
  for (Eigen::Index n = 0; n < xs.size(); ++n) xs(n) = bottom.points[n].x();
  Eigen::VectorXd ys(static_cast<Eigen::Index>(left.points.size()));
  for (Eigen::Index n = 0; n < ys.size(); ++n) ys(n) = left.points[n].y();
  edge_sin_x_ = basis_.axis_table(0, true, xs);
  edge_sin_y_ = basis_.axis_table(1, true, ys);
  Eigen::VectorXd at(1);
  at << 0.0;
  cos_y_bottom_ = basis_.axis_table(1, false, at).row(0);
  cos_x_left_ = basis_.axis_table(0, false, at).row(0);
  at << scenario_.domain.ly;
  cos_y_top_ = basis_.axis_table(1, false, at).row(0);
  at << scenario_.domain.lx;
  cos_x_right_ = basis_.axis_table(0, false, at).row(0);
}

SimState Dynamics::initial_state() const {
  const Basis& b = basis_;
  const Eigen::VectorXd& xs = b.nodes(0);
  const Eigen::VectorXd& ys = b.nodes(1);
  SimState s;
  s.t = 0.0;
  std::array<Grid, 2> vg{Grid::Zero(b.mx(), b.my()), Grid::Zero(b.mx(), b.my())};
  std::array<Grid, 4> fg;
  for (Grid& g : fg) g = Grid::Zero(b.mx(), b.my());
  for (int i = 0; i < b.mx(); ++i) {
    for (int j = 0; j < b.my(); ++j) {
      if (scenario_.v0) {
        const Vec2 v = scenario_.v0(xs(i), ys(j));
        vg[0](i, j) = v.x();
        vg[1](i, j) = v.y();
      }
      const Mat2 F = scenario_.F0 ? scenario_.F0(xs(i), ys(j)) : Mat2::Identity();
      fg[0](i, j) = F(0, 0);
      fg[1](i, j) = F(0, 1);
      fg[2](i, j) = F(1, 0);
      fg[3](i, j) = F(1, 1);
    }
  }
  for (int c = 0; c < 2; ++c) s.v[c] = b.project(vg[c], kVelocityFamilies[c]);
  for (int c = 0; c < 4; ++c) s.F[c] = b.project(fg[c], kDeformationFamilies[c]);
  if (scenario_.prescribed_velocity) s.v = scenario_.prescribed_velocity(0.0);
  if (!s.all_finite()) throw NumericalError("non-finite initial data", 0.0);
  return s;
}

VelocityCoeffs Dynamics::velocity_at(const SimState& s, double t) const {
  if (scenario_.prescribed_velocity) return scenario_.prescribed_velocity(t);
  return s.v;
}

std::array<Grid, 4> Dynamics::deformation_grids(const DeformationCoeffs& F) const {
  std::array<Grid, 4> g;
  for (int c = 0; c < 4; ++c) g[c] = basis_.synthesize(F[c], kDeformationFamilies[c]);
  return g;
}

std::array<Grid, 2> Dynamics::velocity_grids(const VelocityCoeffs& v) const {
  return {basis_.synthesize(v[0], kSC), basis_.synthesize(v[1], kCS)};
}

VelocityCoeffs Dynamics::convective_load(const VelocityCoeffs& v) const {
  const VelocityFields vf = velocity_fields(basis_, v);
  const double rho = scenario_.material.rho;
  const Grid div = vf.grad_grid[0] + vf.grad_grid[3];
  VelocityCoeffs out;
  for (int i = 0; i < 2; ++i) {
    const Grid r = -rho * (vf.v[0].cwiseProduct(vf.grad_grid[2 * i]) +
                           vf.v[1].cwiseProduct(vf.grad_grid[2 * i + 1])) -
                   0.5 * rho * div.cwiseProduct(vf.v[i]);
    out[i] = basis_.project(r, kVelocityFamilies[i]);
  }
  return out;
}

DeformationCoeffs Dynamics::advective_transport(const VelocityCoeffs& v,
                                                const DeformationCoeffs& F) const {
  const std::array<Grid, 2> vg = velocity_grids(v);
  DeformationCoeffs out;
  for (int c = 0; c < 4; ++c) {
    const Family f = kDeformationFamilies[c];
    const Grid fx = basis_.synthesize(basis_.derivative(F[c], f, 0), flip(f, 0));
    const Grid fy = basis_.synthesize(basis_.derivative(F[c], f, 1), flip(f, 1));
    out[c] = basis_.project(-(vg[0].cwiseProduct(fx) + vg[1].cwiseProduct(fy)), f);
  }
  return out;
}

VelocityCoeffs Dynamics::traction_load(double t) const {
  VelocityCoeffs out{Coeffs::Zero(basis_.nx(), basis_.ny()), Coeffs::Zero(basis_.nx(), basis_.ny())};
  if (!scenario_.traction) return out;
  std::array<Eigen::VectorXd, 4> tangential;
  double scale = 0.0;
  double worst_normal = 0.0;
  for (Edge e : kEdges) {
    const EdgeQuadrature& q = basis_.edge_quadrature(e);
    const Vec2 n = outward_normal(e);
    const bool horizontal = (e == Edge::bottom || e == Edge::top);
    Eigen::VectorXd& tg = tangential[static_cast<std::size_t>(e)];
    tg.resize(static_cast<Eigen::Index>(q.points.size()));
    for (std::size_t p = 0; p < q.points.size(); ++p) {
      const Vec2 g = scenario_.traction(t, q.points[p].x(), q.points[p].y());
      scale = std::max(scale, g.norm());
      worst_normal = std::max(worst_normal, std::abs(g.dot(n)));
      tg(static_cast<Eigen::Index>(p)) = q.weights(static_cast<Eigen::Index>(p)) * (horizontal ? g.x() : g.y());
    }
  }
  if (!std::isfinite(scale)) throw NumericalError("non-finite value in traction", t);
  if (worst_normal > 1e-12 * std::max(scale, 1.0)) {
    throw ValidationError("boundary traction must be tangential (g.n = 0)");
  }
  const auto idx = [](Edge e) { return static_cast<std::size_t>(e); };
  const Eigen::VectorXd ab = edge_sin_x_.transpose() * tangential[idx(Edge::bottom)];
  const Eigen::VectorXd at = edge_sin_x_.transpose() * tangential[idx(Edge::top)];
  const Eigen::VectorXd bl = edge_sin_y_.transpose() * tangential[idx(Edge::left)];
  const Eigen::VectorXd br = edge_sin_y_.transpose() * tangential[idx(Edge::right)];
  out[0] = ab * cos_y_bottom_ + at * cos_y_top_;
  out[1] = cos_x_left_.transpose() * bl.transpose() + cos_x_right_.transpose() * br.transpose();
  out[0] = out[0].cwiseProduct(basis_.mask(kSC));
  out[1] = out[1].cwiseProduct(basis_.mask(kCS));
  return out;
}

Rates Dynamics::rates(const SimState& s) const {
  const Basis& b = basis_;
  const MaterialParams& m = scenario_.material;
  const double t = s.t;
  const bool kinematic = static_cast<bool>(scenario_.prescribed_velocity);
  const VelocityCoeffs v = velocity_at(s, t);
  const VelocityFields vf = velocity_fields(b, v);
  const std::array<Grid, 4> Fg = deformation_grids(s.F);

  Rates out;
  StateDiagnostics& d = out.diagnostics;
  d.kinetic = 0.5 * m.rho * (v[0].squaredNorm() + v[1].squaredNorm());

  // Stored energy and conservative stress, pointwise.
  const int mx = b.mx();
  const int my = b.my();
  Grid phi(mx, my);
  std::array<Grid, 4> T;
  for (Grid& g : T) g.resize(mx, my);
  Grid grad_v_norm(mx, my);
  Grid speed(mx, my);
  for (int j = 0; j < my; ++j) {
    for (int i = 0; i < mx; ++i) {
      Mat2 F;
      F << Fg[0](i, j), Fg[1](i, j), Fg[2](i, j), Fg[3](i, j);
      phi(i, j) = stored_energy(F, scenario_.energy);
      if (!kinematic) {
        const Mat2 Ti = cauchy_stress_conservative(F, scenario_.energy);
        T[0](i, j) = Ti(0, 0);
        T[1](i, j) = Ti(0, 1);
        T[2](i, j) = Ti(1, 0);
        T[3](i, j) = Ti(1, 1);
      }
      double gsq = 0.0;
      for (int c = 0; c < 4; ++c) gsq += vf.grad_grid[c](i, j) * vf.grad_grid[c](i, j);
      grad_v_norm(i, j) = std::sqrt(gsq);
      speed(i, j) = std::hypot(vf.v[0](i, j), vf.v[1](i, j));
    }
  }
  d.stored = b.integrate(phi);
  d.max_grad_v = grad_v_norm.maxCoeff();
  d.max_speed = speed.maxCoeff();
  if (!std::isfinite(d.stored)) throw NumericalError("non-finite value in stored energy", t);

  // Strain rate (exact in coefficient space) and its gradient.
  const Coeffs& e11 = vf.grad[0];
  const Coeffs& e22 = vf.grad[3];
  const Coeffs e12 = 0.5 * (vf.grad[1] + vf.grad[2]);
  const StrainGradient sg = strain_gradient(b, vf.grad);
  std::array<Grid, 6> sgg;
  Grid sq = Grid::Zero(mx, my);
  for (int c = 0; c < 6; ++c) {
    sgg[c] = b.synthesize(sg.coeffs[c], kStrainGradientFamilies[c]);
    // E12 appears twice in grad E.
    sq += (c >= 4 ? 2.0 : 1.0) * sgg[c].cwiseAbs2();
  }
  const Grid sg_norm = sq.cwiseSqrt();
  d.max_grad_strain = sg_norm.maxCoeff();
  const Grid coef = sq.unaryExpr([&](double s2) {
    if (m.p == 2.0) return m.nu;
    return s2 > 0.0 ? m.nu * std::pow(s2, 0.5 * (m.p - 2.0)) : 0.0;
  });

  const Coeffs tr = e11 + e22;
  const Coeffs sv11 = m.visc_lambda * tr + 2.0 * m.visc_mu * e11;
  const Coeffs sv22 = m.visc_lambda * tr + 2.0 * m.visc_mu * e22;
  const Coeffs sv12 = 2.0 * m.visc_mu * e12;
  d.dissipation_rate = coeff_dot(sv11, e11) + coeff_dot(sv22, e22) + 2.0 * coeff_dot(sv12, e12) +
                       b.integrate(coef.cwiseProduct(sq));

  // Transport: P[(grad v) F - (v.grad) F] - eps lambda F.
  std::array<Grid, 8> dF;
  for (int c = 0; c < 4; ++c) {
    const Family f = kDeformationFamilies[c];
    for (int k = 0; k < 2; ++k) dF[2 * c + k] = b.synthesize(b.derivative(s.F[c], f, k), flip(f, k));
  }
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const int c = 2 * i + j;
      const Grid g = vf.grad_grid[2 * i].cwiseProduct(Fg[j]) +
                     vf.grad_grid[2 * i + 1].cwiseProduct(Fg[2 + j]) -
                     vf.v[0].cwiseProduct(dF[2 * c]) - vf.v[1].cwiseProduct(dF[2 * c + 1]);
      out.F[c] = b.project(g, kDeformationFamilies[c]);
      if (m.eps > 0.0) out.F[c] -= m.eps * b.eigenvalues().cwiseProduct(s.F[c]);
      out.F[c] = out.F[c].cwiseProduct(b.mask(kDeformationFamilies[c]));
    }
  }
  for (const Coeffs& c : out.F) require_finite(c, "deformation-gradient transport", t);

  // External power.
  VelocityCoeffs body{Coeffs::Zero(b.nx(), b.ny()), Coeffs::Zero(b.nx(), b.ny())};
  if (scenario_.body_force) {
    std::array<Grid, 2> fg{Grid(mx, my), Grid(mx, my)};
    for (int j = 0; j < my; ++j) {
      for (int i = 0; i < mx; ++i) {
        const Vec2 f = scenario_.body_force(t, b.nodes(0)(i), b.nodes(1)(j));
        fg[0](i, j) = f.x();
        fg[1](i, j) = f.y();
      }
    }
    body = {b.project(fg[0], kSC), b.project(fg[1], kCS)};
    require_finite(body, "body force", t);
  }
  const VelocityCoeffs traction = traction_load(t);
  d.external_power = coeff_dot(body[0] + traction[0], v[0]) + coeff_dot(body[1] + traction[1], v[1]);

  if (kinematic) {
    out.v = {Coeffs::Zero(b.nx(), b.ny()), Coeffs::Zero(b.nx(), b.ny())};
    return out;
  }

  const VelocityCoeffs conv = convective_load(v);
  require_finite(conv, "convective/Temam term", t);

  const VelocityCoeffs elastic = stress_load(b, b.project(T[0], kCC), b.project(T[1], kSS),
                                             b.project(T[2], kSS), b.project(T[3], kCC));
  require_finite(elastic, "elastic stress T", t);
  const VelocityCoeffs viscous = stress_load(b, sv11, sv12, sv12, sv22);
  require_finite(viscous, "viscous stress", t);
  std::array<Coeffs, 6> h;
  for (int c = 0; c < 6; ++c) {
    h[c] = b.project(coef.cwiseProduct(sgg[c]), kStrainGradientFamilies[c]);
  }
  const VelocityCoeffs hyper = hyper_load(b, h);
  require_finite(hyper, "hyperstress", t);

  for (int i = 0; i < 2; ++i) {
    const Coeffs load = conv[i] + body[i] + traction[i] - elastic[i] - viscous[i] - hyper[i];
    out.v[i] = (load / m.rho).cwiseProduct(b.mask(kVelocityFamilies[i]));
  }
  return out;
}

VelocityCoeffs Dynamics::momentum_rhs(const SimState& s) const { return rates(s).v; }

DeformationCoeffs Dynamics::transport_rhs(const SimState& s) const { return rates(s).F; }

double Dynamics::hyperviscosity_shift(double max_grad_strain) const {
  const MaterialParams& m = scenario_.material;
  if (m.p == 2.0) return m.nu;
  // The linearisation of nu |g|^{p-2} g has eigenvalues up to (p - 1) nu |g|^{p-2}.
  return scenario_.integrator.shift_safety * (m.p - 1.0) * m.nu * std::pow(max_grad_strain, m.p - 2.0);
}

VelocityCoeffs Dynamics::linear_viscous_load(const VelocityCoeffs& v, double shift) const {
  const Basis& b = basis_;
  const MaterialParams& m = scenario_.material;
  std::array<Coeffs, 4> grad;
  for (int i = 0; i < 2; ++i) {
    for (int k = 0; k < 2; ++k) grad[2 * i + k] = b.derivative(v[i], kVelocityFamilies[i], k);
  }
  const Coeffs tr = grad[0] + grad[3];
  const Coeffs e12 = 0.5 * (grad[1] + grad[2]);
  const VelocityCoeffs visc =
      stress_load(b, m.visc_lambda * tr + 2.0 * m.visc_mu * grad[0], 2.0 * m.visc_mu * e12,
                  2.0 * m.visc_mu * e12, m.visc_lambda * tr + 2.0 * m.visc_mu * grad[3]);
  StrainGradient sg = strain_gradient(b, grad);
  for (Coeffs& c : sg.coeffs) c *= shift;
  const VelocityCoeffs hyper = hyper_load(b, sg.coeffs);
  return {visc[0] + hyper[0], visc[1] + hyper[1]};
}

Dynamics::ImplicitOperator Dynamics::build_implicit(double shift, double dt) const {
  const Basis& b = basis_;
  const double rho = scenario_.material.rho;
  const double threshold = scenario_.integrator.stiff_threshold;
  const int nx = b.nx();
  const int ny = b.ny();
  // Block diagonal per mode: probe with all-ones fields in each component.
  const Coeffs zero = Coeffs::Zero(nx, ny);
  const VelocityCoeffs c1 = linear_viscous_load({b.mask(kSC), zero}, shift);
  const VelocityCoeffs c2 = linear_viscous_load({zero, b.mask(kCS)}, shift);
  ImplicitOperator op;
  op.a11 = Coeffs::Zero(nx, ny);
  op.a12 = Coeffs::Zero(nx, ny);
  op.a22 = Coeffs::Zero(nx, ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      Mat2 A;
      A << c1[0](i, j), 0.5 * (c2[0](i, j) + c1[1](i, j)), 0.5 * (c2[0](i, j) + c1[1](i, j)),
          c2[1](i, j);
      A /= rho;
      const Eigen::SelfAdjointEigenSolver<Mat2> es(A);
      Mat2 P = Mat2::Zero();
      for (int k = 0; k < 2; ++k) {
        const double mu = es.eigenvalues()(k);
        if (mu * dt > threshold) {
          P += mu * es.eigenvectors().col(k) * es.eigenvectors().col(k).transpose();
          ++op.directions;
        }
      }
      op.a11(i, j) = P(0, 0);
      op.a12(i, j) = P(0, 1);
      op.a22(i, j) = P(1, 1);
    }
  }
  const double eps = scenario_.material.eps;
  const Coeffs rate = eps * b.eigenvalues();
  const Coeffs stiff = (rate.array() * dt > threshold).cast<double>().matrix();
  op.f_rate_cc = rate.cwiseProduct(stiff).cwiseProduct(b.mask(kCC));
  op.f_rate_ss = rate.cwiseProduct(stiff).cwiseProduct(b.mask(kSS));
  op.directions += static_cast<int>((op.f_rate_cc.array() > 0.0).count() * 2 +
                                    (op.f_rate_ss.array() > 0.0).count() * 2);
  return op;
}

StepReport Dynamics::step_report(const SimState& s, double dt) const {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  const bool kinematic = static_cast<bool>(scenario_.prescribed_velocity);
  StepReport report;
  SimState u = s;
  if (kinematic) u.v = velocity_at(s, s.t);

  Rates r = rates(u);
  report.shift = hyperviscosity_shift(r.diagnostics.max_grad_strain);
  const ImplicitOperator op = build_implicit(report.shift, dt);
  report.implicit_directions = op.directions;
  report.v_rate_start = r.v;
  const double h = std::min(scenario_.domain.lx / basis_.mx(), scenario_.domain.ly / basis_.my());

  VelocityCoeffs prev_v;
  DeformationCoeffs prev_F;
  for (int k = 0; k < 3; ++k) {
    const double tk = s.t + kStageTime[k] * dt;
    if (k > 0) {
      u.t = tk;
      if (kinematic) u.v = velocity_at(u, tk);
      r = rates(u);
    }
    report.stages[k] = {tk, kStageWeight[k], r.diagnostics};
    if (r.diagnostics.max_speed * dt > h) report.cfl_exceeded = true;

    // Explicit remainder N = rate + P u.
    VelocityCoeffs nv = r.v;
    DeformationCoeffs nF = r.F;
    if (!kinematic) {
      nv[0] += op.a11.cwiseProduct(u.v[0]) + op.a12.cwiseProduct(u.v[1]);
      nv[1] += op.a12.cwiseProduct(u.v[0]) + op.a22.cwiseProduct(u.v[1]);
    }
    for (int c = 0; c < 4; ++c) {
      const Coeffs& fr = (kDeformationFamilies[c] == kCC) ? op.f_rate_cc : op.f_rate_ss;
      nF[c] += fr.cwiseProduct(u.F[c]);
    }

    const double ck = (kGamma[k] + kZeta[k]) * dt;
    for (int c = 0; c < 4; ++c) {
      Coeffs rhs = u.F[c] + dt * kGamma[k] * nF[c];
      if (k > 0) rhs += dt * kZeta[k] * prev_F[c];
      const Coeffs& fr = (kDeformationFamilies[c] == kCC) ? op.f_rate_cc : op.f_rate_ss;
      u.F[c] = rhs.array() / (1.0 + ck * fr.array());
    }
    if (!kinematic) {
      Coeffs r1 = u.v[0] + dt * kGamma[k] * nv[0];
      Coeffs r2 = u.v[1] + dt * kGamma[k] * nv[1];
      if (k > 0) {
        r1 += dt * kZeta[k] * prev_v[0];
        r2 += dt * kZeta[k] * prev_v[1];
      }
      // (I + ck A) x = r per mode, A symmetric 2x2.
      const Eigen::ArrayXXd m11 = 1.0 + ck * op.a11.array();
      const Eigen::ArrayXXd m12 = ck * op.a12.array();
      const Eigen::ArrayXXd m22 = 1.0 + ck * op.a22.array();
      const Eigen::ArrayXXd det = m11 * m22 - m12 * m12;
      u.v[0] = ((m22 * r1.array() - m12 * r2.array()) / det).matrix();
      u.v[1] = ((m11 * r2.array() - m12 * r1.array()) / det).matrix();
    }
    prev_v = nv;
    prev_F = nF;
  }
  u.t = s.t + dt;
  if (kinematic) u.v = velocity_at(u, u.t);
  if (!u.all_finite()) throw NumericalError("non-finite state after step", u.t);
  report.next = std::move(u);
  return report;
}

VectorFn stream_function_velocity(const Domain& d, double amplitude) {
  constexpr double pi = std::numbers::pi;
  const double lx = d.lx;
  const double ly = d.ly;
  return [=](double x, double y) {
    return Vec2(amplitude * std::sin(pi * x / lx) * std::cos(pi * y / ly),
                -amplitude * (ly / lx) * std::cos(pi * x / lx) * std::sin(pi * y / ly));
  };
}

}  // namespace kvflow
