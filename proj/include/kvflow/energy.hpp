#pragma once

#include "kvflow/dynamics.hpp"

#include <span>

namespace kvflow {

/// Instantaneous terms of the energy balance.
struct EnergySample {
  double kinetic = 0.0;
  double stored = 0.0;
  double dissipation_rate = 0.0;
  double external_power = 0.0;
};

/// Running balance  E_kin + E_sto + D_cum - W_cum - (E_kin + E_sto)(0).
struct EnergyLedger {
  double t = 0.0;
  double kinetic = 0.0;
  double stored = 0.0;
  double dissipation_cum = 0.0;
  double work_cum = 0.0;
  double initial_total = 0.0;
  double residual = 0.0;
  /// Running max of E_kin + E_sto, the scale for the relative residual.
  double energy_scale = 0.0;

  double total() const { return kinetic + stored; }
  double residual_relative() const;
};

EnergySample ledger_sample(const Dynamics& dyn, const SimState& s);
EnergySample to_sample(const StateDiagnostics& d);

EnergyLedger ledger_start(const EnergySample& s0, double t0 = 0.0);

/// Advance D_cum and W_cum over one step with the integrator's stage
/// quadrature; kinetic and stored terms are taken from `end`.
EnergyLedger ledger_accumulate(const EnergyLedger& prev, std::span<const StageRecord> stages,
                               double dt, const EnergySample& end, double t_end);

struct AprioriMonitors {
  double F_L2 = 0.0;
  double gradF_L2 = 0.0;
  double v_L2 = 0.0;
  double gradv_Linf = 0.0;
  double gradE_Lp = 0.0;
  double min_detF = 0.0;
};

AprioriMonitors apriori_monitors(const Dynamics& dyn, const SimState& s);

}  // namespace kvflow
