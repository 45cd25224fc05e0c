#pragma once

// Run configuration: a sectioned key = value file.
//
//   [scenario]        name
//   [domain]          lx, ly
//   [discretization]  nx, ny, mx, my
//   [material]        rho, visc_lambda, visc_mu, nu, p, bulk, shear, eta, eps,
//                     energy, det_penalty
//   [time]            t_end, dt, stiff_threshold, shift_safety
//   [initial]         velocity, velocity_amplitude, deformation, deformation_amplitude
//   [load]            body_force, body_amplitude, traction, traction_amplitude
//   [output]          directory, sample_stride, snapshot_stride
//   [experiment]      sweep_mode, values
//   [validation]      eta_zero, strict_exponent
//
// Every key is optional except scenario.name; unknown sections or keys are errors.

#include "kvflow/dynamics.hpp"

#include <string>
#include <vector>

namespace kvflow {

enum class EtaZeroPolicy { warn, error, ignore };

struct RunConfig {
  std::string name;
  Domain domain;
  int nx = 32;
  int ny = 32;
  int mx = 0;
  int my = 0;
  MaterialParams material;
  EnergyKind energy = EnergyKind::regularized_svk;
  double det_penalty = 0.0;
  double t_end = 1.0;
  double dt = 1e-3;
  IntegratorOptions integrator;

  /// rest | stream | potential | mixed
  std::string velocity = "stream";
  double velocity_amplitude = 1.0;
  /// identity | shear | stretch
  std::string deformation = "identity";
  double deformation_amplitude = 0.0;
  /// none | mode | pulse
  std::string body_force = "none";
  double body_amplitude = 0.0;
  /// none | shear
  std::string traction = "none";
  double traction_amplitude = 0.0;

  std::string output_dir = "output";
  int sample_stride = 10;
  int snapshot_stride = 0;  ///< 0: first and last state only

  /// viscous | elastic (incompressible-limit sweep)
  std::string sweep_mode = "viscous";
  std::vector<double> sweep_values;

  EtaZeroPolicy eta_zero = EtaZeroPolicy::warn;
  bool strict_exponent = true;

  bool operator==(const RunConfig&) const = default;
};

/// Throws ConfigError naming the key or the violated rule. Non-fatal
/// findings (e.g. eta = 0 under the warn policy) are appended to `warnings`.
RunConfig parse_config(const std::string& text, std::vector<std::string>* warnings = nullptr);
RunConfig load_config(const std::string& path, std::vector<std::string>* warnings = nullptr);
/// Canonical text; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& c);
/// Parameter rules; throws ConfigError.
void validate_config(const RunConfig& c, std::vector<std::string>* warnings = nullptr);

/// Closed-form presets evaluated for the configured domain.
Scenario make_scenario(const RunConfig& c);

std::string to_string(EtaZeroPolicy p);

}  // namespace kvflow
