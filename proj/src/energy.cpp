#include "kvflow/energy.hpp"

#include <algorithm>
#include <cmath>

namespace kvflow {

double EnergyLedger::residual_relative() const {
  const double scale = std::max(energy_scale, initial_total);
  return scale > 0.0 ? residual / scale : residual;
}

EnergySample to_sample(const StateDiagnostics& d) {
  return {d.kinetic, d.stored, d.dissipation_rate, d.external_power};
}

EnergySample ledger_sample(const Dynamics& dyn, const SimState& s) {
  return to_sample(dyn.diagnostics(s));
}

EnergyLedger ledger_start(const EnergySample& s0, double t0) {
  EnergyLedger l;
  l.t = t0;
  l.kinetic = s0.kinetic;
  l.stored = s0.stored;
  l.initial_total = s0.kinetic + s0.stored;
  l.energy_scale = l.initial_total;
  return l;
}

EnergyLedger ledger_accumulate(const EnergyLedger& prev, std::span<const StageRecord> stages,
                               double dt, const EnergySample& end, double t_end) {
  EnergyLedger l = prev;
  double d = 0.0;
  double w = 0.0;
  for (const StageRecord& st : stages) {
    d += st.weight * st.diagnostics.dissipation_rate;
    w += st.weight * st.diagnostics.external_power;
  }
  l.dissipation_cum += dt * d;
  l.work_cum += dt * w;
  l.t = t_end;
  l.kinetic = end.kinetic;
  l.stored = end.stored;
  l.energy_scale = std::max(l.energy_scale, l.total());
  l.residual = l.total() + l.dissipation_cum - l.work_cum - l.initial_total;
  return l;
}

AprioriMonitors apriori_monitors(const Dynamics& dyn, const SimState& s) {
  const Basis& b = dyn.basis();
  const MaterialParams& m = dyn.scenario().material;
  AprioriMonitors out;
  const VelocityCoeffs v = dyn.velocity_at(s, s.t);

  double f2 = 0.0;
  double gf2 = 0.0;
  for (int c = 0; c < 4; ++c) {
    f2 += s.F[c].squaredNorm();
    gf2 += s.F[c].cwiseAbs2().cwiseProduct(b.eigenvalues()).sum();
  }
  out.F_L2 = std::sqrt(f2);
  out.gradF_L2 = std::sqrt(gf2);
  out.v_L2 = std::sqrt(v[0].squaredNorm() + v[1].squaredNorm());

  const std::array<Grid, 4> Fg = dyn.deformation_grids(s.F);
  const Grid det = Fg[0].cwiseProduct(Fg[3]) - Fg[1].cwiseProduct(Fg[2]);
  out.min_detF = det.minCoeff();

  const Coeffs e11 = b.derivative(v[0], Family::sc, 0);
  const Coeffs v1y = b.derivative(v[0], Family::sc, 1);
  const Coeffs v2x = b.derivative(v[1], Family::cs, 0);
  const Coeffs e22 = b.derivative(v[1], Family::cs, 1);
  const Grid gv = (b.synthesize(e11, Family::cc).cwiseAbs2() + b.synthesize(v1y, Family::ss).cwiseAbs2() +
                   b.synthesize(v2x, Family::ss).cwiseAbs2() + b.synthesize(e22, Family::cc).cwiseAbs2())
                      .cwiseSqrt();
  out.gradv_Linf = gv.maxCoeff();

  // ||grad E||_{L^p} from the strain gradient on the grid.
  const Coeffs e12 = 0.5 * (v1y + v2x);
  Grid sq = Grid::Zero(b.mx(), b.my());
  for (int k = 0; k < 2; ++k) {
    sq += b.synthesize(b.derivative(e11, Family::cc, k), flip(Family::cc, k)).cwiseAbs2();
    sq += b.synthesize(b.derivative(e22, Family::cc, k), flip(Family::cc, k)).cwiseAbs2();
    sq += 2.0 * b.synthesize(b.derivative(e12, Family::ss, k), flip(Family::ss, k)).cwiseAbs2();
  }
  const double p = m.p;
  out.gradE_Lp = std::pow(b.integrate(sq.unaryExpr([p](double x) { return std::pow(x, 0.5 * p); })),
                          1.0 / p);
  return out;
}

}  // namespace kvflow
