#pragma once

#include "kvflow/config.hpp"
#include "kvflow/dynamics.hpp"
#include "kvflow/energy.hpp"
#include "kvflow/kinematics.hpp"
#include "kvflow/snapshot.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace kvflow {

/// One line of the time-series CSV.
struct SeriesRow {
  double t = 0.0;
  double E_kin = 0.0;
  double E_sto = 0.0;
  double D_cum = 0.0;
  double W_cum = 0.0;
  double residual = 0.0;
  double residual_rel = 0.0;
  double F_L2 = 0.0;
  double gradF_L2 = 0.0;
  double v_L2 = 0.0;
  double gradv_Linf = 0.0;
  double gradE_Lp = 0.0;
  double min_detF = 0.0;
  double det_defect = 0.0;
  double return_map_defect = 0.0;
};

std::string csv_header();
std::string csv_line(const SeriesRow& r);

struct RunOptions {
  int sample_stride = 1;
  bool track_return_map = true;
  /// Called for every emitted row, in time order.
  std::function<void(const SeriesRow&, const SimState&)> on_sample;
  /// Called for every state (step index, final flag), in time order.
  std::function<void(const SimState&, long step, bool final)> on_state;
  std::function<void(const std::string&)> on_warning;
};

struct RunResult {
  SimState final;
  EnergyLedger ledger;
  ReturnMapState return_map;
  std::vector<SeriesRow> rows;
  long steps = 0;
  bool aborted = false;
  std::string error;
  double abort_time = 0.0;
  /// max_t |residual| / max_t (E_kin + E_sto)
  double max_residual_rel = 0.0;
  /// Smallest dissipation rate seen at any integrator stage.
  double min_dissipation_rate = 0.0;
  /// ||div v||_{L2(I x Omega)} by trapezoidal time quadrature over steps.
  double div_v_space_time = 0.0;
};

/// Advance the projected initial data to t_end. Numerical errors are caught
/// and reported through `aborted`; rows up to the failure are kept.
RunResult run_trajectory(const Dynamics& dyn, const RunOptions& opt = {});

Snapshot make_snapshot(const Dynamics& dyn, const SimState& s);

struct RunSummary {
  int exit_code = 0;
  std::string message;
  std::string csv_path;
  std::vector<std::string> snapshot_paths;
  RunResult result;
};

/// Runs the configured scenario and writes <dir>/<name>.csv, <name>.ini and
/// snapshots <name>_<step>.kvsnap. Exit code 0 on success, 3 on numerical abort.
RunSummary run_scenario(const RunConfig& cfg, const std::function<void(const std::string&)>& warn = {});

struct SweepRow {
  double value = 0.0;
  double metric = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double slope = 0.0;       ///< least-squares log-log slope (sweep-k)
  bool monotone = false;    ///< strictly decreasing metric (sweep-eps)
  bool complete = true;
  std::string error;
};

enum class BulkMode { viscous, elastic };
BulkMode bulk_mode_from_string(const std::string& s);

/// ||div v||_{L2(I x Omega)} per K. Viscous mode sets visc_lambda = K - visc_mu;
/// elastic mode adds K (1 - det F)^2 to the stored energy.
SweepResult sweep_incompressible_limit(const RunConfig& base, const std::vector<double>& ks, BulkMode mode);
/// ||F_eps - F_0||_{L2} at t_end per eps > 0; the eps = 0 reference is always run.
SweepResult sweep_epsilon(const RunConfig& base, const std::vector<double>& eps);

std::string sweep_csv(const SweepResult& r, const std::string& value_name, const std::string& metric_name);

struct PropertyCheck {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Randomised property suite on the configured discretisation.
std::vector<PropertyCheck> verify_properties(const RunConfig& cfg, std::uint64_t seed);

/// Discrete tested sum  int rho (v.grad)v.v + (rho/2)(div v)|v|^2  through the momentum assembly.
double convective_skew_defect(const Dynamics& dyn, const VelocityCoeffs& v);
/// Discrete  int ((v.grad)F):F + 1/2 (div v)|F|^2  through the transport assembly.
double transport_energy_defect(const Dynamics& dyn, const VelocityCoeffs& v, const DeformationCoeffs& F);

}  // namespace kvflow
