#include "kvflow/simulation.hpp"

#include "kvflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <random>

namespace kvflow {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

long step_count(const Scenario& s) {
  if (s.t_end <= 0.0) return 0;
  return std::max(1L, static_cast<long>(std::ceil(s.t_end / s.dt - 1e-9)));
}

double div_norm_sq(const Dynamics& dyn, const SimState& s) {
  const Basis& b = dyn.basis();
  const VelocityCoeffs v = dyn.velocity_at(s, s.t);
  return (b.derivative(v[0], Family::sc, 0) + b.derivative(v[1], Family::cs, 1)).squaredNorm();
}

Coeffs random_coeffs(const Basis& b, Family f, std::mt19937_64& rng, double decay) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Coeffs c(b.nx(), b.ny());
  for (int j = 0; j < b.ny(); ++j) {
    for (int i = 0; i < b.nx(); ++i) c(i, j) = n01(rng) / std::pow(1.0 + i * i + j * j, decay);
  }
  return c.cwiseProduct(b.mask(f));
}

}  // namespace

std::string csv_header() {
  return "t,E_kin,E_sto,D_cum,W_cum,residual,residual_rel,F_L2,gradF_L2,v_L2,gradv_Linf,gradE_Lp,"
         "min_detF,det_defect,return_map_defect";
}

std::string csv_line(const SeriesRow& r) {
  const double values[] = {r.t,        r.E_kin,      r.E_sto,    r.D_cum,    r.W_cum,
                           r.residual, r.residual_rel, r.F_L2,   r.gradF_L2, r.v_L2,
                           r.gradv_Linf, r.gradE_Lp, r.min_detF, r.det_defect, r.return_map_defect};
  std::string out;
  for (std::size_t i = 0; i < std::size(values); ++i) {
    if (i) out += ',';
    out += fmt(values[i]);
  }
  return out;
}

RunResult run_trajectory(const Dynamics& dyn, const RunOptions& opt) {
  const Scenario& scn = dyn.scenario();
  const Basis& b = dyn.basis();
  const bool kinematic = static_cast<bool>(scn.prescribed_velocity);
  const int stride = std::max(1, opt.sample_stride);
  RunResult res;
  res.min_dissipation_rate = std::numeric_limits<double>::infinity();

  VelocityHistory history;
  const VelocityProvider w_velocity =
      kinematic ? scn.prescribed_velocity : VelocityProvider([&history](double t) { return history.at(t); });
  ReturnMapState w = return_map_identity(b, 0.0);

  SimState s;
  std::optional<SimState> prev;
  std::array<StageRecord, 3> pending_stages{};
  double pending_dt = 0.0;
  double max_total = 0.0;
  double max_abs_residual = 0.0;
  double div_integral = 0.0;
  double div_prev = 0.0;
  bool warned_cfl = false;
  const long n_steps = step_count(scn);

  try {
    s = dyn.initial_state();
    div_prev = div_norm_sq(dyn, s);
    for (long n = 0; n <= n_steps; ++n) {
      const bool last = (n == n_steps);
      StepReport report;
      StateDiagnostics now;
      VelocityCoeffs rate_now;
      double h = 0.0;
      if (!last) {
        h = (n + 1 == n_steps) ? scn.t_end - s.t : scn.dt;
        if (!(h > 0.0)) h = scn.dt;
        report = dyn.step_report(s, h);
        now = report.stages[0].diagnostics;
        rate_now = report.v_rate_start;
        for (const StageRecord& st : report.stages) {
          res.min_dissipation_rate = std::min(res.min_dissipation_rate, st.diagnostics.dissipation_rate);
        }
        if (report.cfl_exceeded && !warned_cfl) {
          warned_cfl = true;
          if (opt.on_warning) {
            opt.on_warning("dt exceeds the advective limit h / max|v| at t = " + fmt(s.t));
          }
        }
      } else {
        const Rates r = dyn.rates(s);
        now = r.diagnostics;
        rate_now = r.v;
        res.min_dissipation_rate = std::min(res.min_dissipation_rate, now.dissipation_rate);
      }

      if (n == 0) {
        res.ledger = ledger_start(to_sample(now), s.t);
      } else {
        res.ledger = ledger_accumulate(res.ledger, pending_stages, pending_dt, to_sample(now), s.t);
        const double div_now = div_norm_sq(dyn, s);
        div_integral += 0.5 * pending_dt * (div_prev + div_now);
        div_prev = div_now;
      }
      max_total = std::max(max_total, res.ledger.total());
      max_abs_residual = std::max(max_abs_residual, std::abs(res.ledger.residual));

      if (opt.track_return_map) {
        if (!kinematic) history.append(s.t, s.v, rate_now);
        if (n > 0) {
          w = return_map_step(b, w, w_velocity, s.t - w.t);
          w.t = s.t;
        }
      }

      if (n % stride == 0 || last) {
        SeriesRow row;
        row.t = s.t;
        row.E_kin = res.ledger.kinetic;
        row.E_sto = res.ledger.stored;
        row.D_cum = res.ledger.dissipation_cum;
        row.W_cum = res.ledger.work_cum;
        row.residual = res.ledger.residual;
        row.residual_rel = res.ledger.residual_relative();
        const AprioriMonitors mon = apriori_monitors(dyn, s);
        row.F_L2 = mon.F_L2;
        row.gradF_L2 = mon.gradF_L2;
        row.v_L2 = mon.v_L2;
        row.gradv_Linf = mon.gradv_Linf;
        row.gradE_Lp = mon.gradE_Lp;
        row.min_detF = mon.min_detF;
        const SimState* before = prev ? &*prev : nullptr;
        const SimState* after = last ? nullptr : &report.next;
        if (before && after) {
          row.det_defect = det_transport_defect(
              dyn, s, (determinant_grid(dyn, after->F) - determinant_grid(dyn, before->F)) / (after->t - before->t));
        } else if (after) {
          row.det_defect = det_transport_defect(
              dyn, s, (determinant_grid(dyn, after->F) - determinant_grid(dyn, s.F)) / (after->t - s.t));
        } else if (before) {
          row.det_defect = det_transport_defect(
              dyn, s, (determinant_grid(dyn, s.F) - determinant_grid(dyn, before->F)) / (s.t - before->t));
        } else {
          row.det_defect = kNaN;
        }
        row.return_map_defect = opt.track_return_map ? return_map_defect(b, w, s.F, scn.F0).defect : kNaN;
        res.rows.push_back(row);
        if (opt.on_sample) opt.on_sample(row, s);
      }
      if (opt.on_state) opt.on_state(s, n, last);

      if (!last) {
        prev = s;
        pending_stages = report.stages;
        pending_dt = h;
        s = std::move(report.next);
        // Invariant: step n sits at n dt, the last at t_end.
        s.t = (n + 1 == n_steps) ? scn.t_end : static_cast<double>(n + 1) * scn.dt;
        ++res.steps;
      }
    }
  } catch (const NumericalError& e) {
    res.aborted = true;
    res.error = e.what();
    res.abort_time = e.time();
  }
  res.final = s;
  res.return_map = w;
  res.max_residual_rel = max_total > 0.0 ? max_abs_residual / max_total : max_abs_residual;
  res.div_v_space_time = std::sqrt(div_integral);
  return res;
}

Snapshot make_snapshot(const Dynamics& dyn, const SimState& s) {
  const Basis& b = dyn.basis();
  Snapshot snap;
  snap.nx = static_cast<std::uint32_t>(b.nx());
  snap.ny = static_cast<std::uint32_t>(b.ny());
  snap.mx = static_cast<std::uint32_t>(b.mx());
  snap.my = static_cast<std::uint32_t>(b.my());
  snap.lx = b.domain().lx;
  snap.ly = b.domain().ly;
  snap.t = s.t;
  const std::array<Grid, 2> v = dyn.velocity_grids(dyn.velocity_at(s, s.t));
  const std::array<Grid, 4> F = dyn.deformation_grids(s.F);
  snap.names = {"v1", "v2", "F11", "F12", "F21", "F22", "detF"};
  snap.fields = {v[0], v[1], F[0], F[1], F[2], F[3], F[0].cwiseProduct(F[3]) - F[1].cwiseProduct(F[2])};
  return snap;
}

RunSummary run_scenario(const RunConfig& cfg, const std::function<void(const std::string&)>& warn) {
  namespace fs = std::filesystem;
  validate_config(cfg);
  const Dynamics dyn(make_scenario(cfg));
  RunSummary summary;
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  {
    std::ofstream echo(dir / (cfg.name + ".ini"), std::ios::trunc);
    echo << serialize_config(cfg);
  }
  summary.csv_path = (dir / (cfg.name + ".csv")).string();
  std::ofstream csv(summary.csv_path, std::ios::trunc);
  if (!csv) throw ConfigError("cannot write '" + summary.csv_path + "'");
  csv << csv_header() << '\n';

  RunOptions opt;
  opt.sample_stride = cfg.sample_stride;
  opt.on_warning = warn;
  opt.on_sample = [&csv](const SeriesRow& r, const SimState&) {
    csv << csv_line(r) << '\n';
    csv.flush();
  };
  opt.on_state = [&](const SimState& s, long step, bool final) {
    const bool due = step == 0 || final || (cfg.snapshot_stride > 0 && step % cfg.snapshot_stride == 0);
    if (!due) return;
    char name[64];
    std::snprintf(name, sizeof name, "_%06ld.kvsnap", step);
    const std::string path = (dir / (cfg.name + name)).string();
    write_snapshot(path, make_snapshot(dyn, s));
    summary.snapshot_paths.push_back(path);
  };
  summary.result = run_trajectory(dyn, opt);
  if (summary.result.aborted) {
    summary.exit_code = 3;
    summary.message = "numerical abort at t = " + fmt(summary.result.abort_time) + ": " + summary.result.error;
  } else {
    summary.message = "completed " + std::to_string(summary.result.steps) + " steps";
  }
  return summary;
}

BulkMode bulk_mode_from_string(const std::string& s) {
  if (s == "viscous") return BulkMode::viscous;
  if (s == "elastic") return BulkMode::elastic;
  throw ConfigError("unknown sweep mode '" + s + "' (expected viscous or elastic)");
}

SweepResult sweep_incompressible_limit(const RunConfig& base, const std::vector<double>& ks, BulkMode mode) {
  if (ks.size() < 3) throw ConfigError("sweep-k needs at least 3 values");
  for (double k : ks) {
    if (!(k > 0.0)) throw ConfigError("sweep-k values must be positive");
  }
  const double ratio = ks[1] / ks[0];
  for (std::size_t i = 1; i < ks.size(); ++i) {
    if (std::abs(ks[i] / ks[i - 1] - ratio) > 1e-6 * ratio || ratio == 1.0) {
      throw ConfigError("sweep-k values must be geometrically spaced");
    }
  }
  SweepResult out;
  for (double k : ks) {
    RunConfig c = base;
    if (mode == BulkMode::viscous) {
      if (k < c.material.visc_mu) throw ConfigError("viscous bulk sweep needs K >= visc_mu");
      c.material.visc_lambda = k - c.material.visc_mu;
    } else {
      c.det_penalty = k;
    }
    const Dynamics dyn(make_scenario(c));
    RunOptions opt;
    opt.sample_stride = std::numeric_limits<int>::max();
    opt.track_return_map = false;
    const RunResult r = run_trajectory(dyn, opt);
    if (r.aborted) {
      out.complete = false;
      out.error = "K = " + fmt(k) + ": " + r.error;
      break;
    }
    out.rows.push_back({k, r.div_v_space_time});
  }
  // Least-squares slope of log(metric) against log(K).
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  bool positive = out.rows.size() >= 2;
  for (const SweepRow& row : out.rows) {
    if (!(row.metric > 0.0)) positive = false;
  }
  if (positive) {
    const double n = static_cast<double>(out.rows.size());
    for (const SweepRow& row : out.rows) {
      const double x = std::log(row.value);
      const double y = std::log(row.metric);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    out.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  } else {
    out.slope = kNaN;
  }
  return out;
}

SweepResult sweep_epsilon(const RunConfig& base, const std::vector<double>& eps) {
  std::vector<double> values;
  for (double e : eps) {
    if (e < 0.0) throw ConfigError("sweep-eps values must be nonnegative");
    if (e > 0.0) values.push_back(e);
  }
  std::sort(values.begin(), values.end(), std::greater<>());
  SweepResult out;
  auto final_F = [](const RunConfig& c, std::string* err) -> std::optional<DeformationCoeffs> {
    const Dynamics dyn(make_scenario(c));
    RunOptions opt;
    opt.sample_stride = std::numeric_limits<int>::max();
    opt.track_return_map = false;
    const RunResult r = run_trajectory(dyn, opt);
    if (r.aborted) {
      *err = r.error;
      return std::nullopt;
    }
    return r.final.F;
  };
  if (values.empty()) return out;
  RunConfig ref = base;
  ref.material.eps = 0.0;
  std::string err;
  const auto f0 = final_F(ref, &err);
  if (!f0) {
    out.complete = false;
    out.error = "eps = 0: " + err;
    return out;
  }
  for (double e : values) {
    RunConfig c = base;
    c.material.eps = e;
    const auto fe = final_F(c, &err);
    if (!fe) {
      out.complete = false;
      out.error = "eps = " + fmt(e) + ": " + err;
      break;
    }
    double d2 = 0.0;
    for (int k = 0; k < 4; ++k) d2 += ((*fe)[k] - (*f0)[k]).squaredNorm();
    out.rows.push_back({e, std::sqrt(d2)});
  }
  out.monotone = out.complete && !out.rows.empty();
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    if (!(out.rows[i].metric < out.rows[i - 1].metric)) out.monotone = false;
  }
  out.slope = kNaN;
  return out;
}

std::string sweep_csv(const SweepResult& r, const std::string& value_name, const std::string& metric_name) {
  std::string out = value_name + "," + metric_name + "\n";
  for (const SweepRow& row : r.rows) out += fmt(row.value) + "," + fmt(row.metric) + "\n";
  return out;
}

double convective_skew_defect(const Dynamics& dyn, const VelocityCoeffs& v) {
  const VelocityCoeffs load = dyn.convective_load(v);
  return -(load[0].cwiseProduct(v[0]).sum() + load[1].cwiseProduct(v[1]).sum());
}

double transport_energy_defect(const Dynamics& dyn, const VelocityCoeffs& v, const DeformationCoeffs& F) {
  const Basis& b = dyn.basis();
  const DeformationCoeffs adv = dyn.advective_transport(v, F);
  double tested = 0.0;
  for (int c = 0; c < 4; ++c) tested -= adv[c].cwiseProduct(F[c]).sum();
  const std::array<Grid, 4> Fg = dyn.deformation_grids(F);
  Grid fsq = Grid::Zero(b.mx(), b.my());
  for (const Grid& g : Fg) fsq += g.cwiseAbs2();
  const Grid div = b.synthesize(b.derivative(v[0], Family::sc, 0) + b.derivative(v[1], Family::cs, 1),
                                Family::cc);
  return tested + 0.5 * b.integrate(div.cwiseProduct(fsq));
}

std::vector<PropertyCheck> verify_properties(const RunConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<PropertyCheck> out;
  const Dynamics dyn(make_scenario(cfg));
  const Basis& b = dyn.basis();
  const double rho = cfg.material.rho;

  {
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      const VelocityCoeffs v{random_coeffs(b, Family::sc, rng, 1.0), random_coeffs(b, Family::cs, rng, 1.0)};
      const std::array<Grid, 2> vg = dyn.velocity_grids(v);
      const Grid speed = (vg[0].cwiseAbs2() + vg[1].cwiseAbs2()).cwiseSqrt();
      const double l3 = b.integrate(speed.array().cube().matrix());
      worst = std::max(worst, std::abs(convective_skew_defect(dyn, v)) / (rho * l3));
    }
    out.push_back({"convective skew symmetry", worst, 1e-10, worst < 1e-10});
  }
  {
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      const VelocityCoeffs v{random_coeffs(b, Family::sc, rng, 1.0), random_coeffs(b, Family::cs, rng, 1.0)};
      DeformationCoeffs F;
      for (int c = 0; c < 4; ++c) F[c] = random_coeffs(b, kDeformationFamilies[c], rng, 1.0);
      const std::array<Grid, 2> vg = dyn.velocity_grids(v);
      const double vinf = (vg[0].cwiseAbs2() + vg[1].cwiseAbs2()).cwiseSqrt().maxCoeff();
      double f2 = 0.0;
      for (int c = 0; c < 4; ++c) f2 += F[c].squaredNorm();
      const double scale = vinf * f2 + 1e-300;
      worst = std::max(worst, std::abs(transport_energy_defect(dyn, v, F)) / scale);
    }
    out.push_back({"F-transport energy identity", worst, 1e-10, worst < 1e-10});
  }
  {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * 3.141592653589793);
    double grad_worst = 0.0;
    double frame_worst = 0.0;
    double sym_worst = 0.0;
    const StoredEnergyModel model = dyn.scenario().energy;
    int accepted = 0;
    while (accepted < 100) {
      Mat2 F = Mat2::Identity();
      for (int i = 0; i < 4; ++i) F.data()[i] += u(rng);
      if (F.norm() > 3.0 || F.determinant() <= 0.1) continue;
      ++accepted;
      const Mat2 a = stored_energy_derivative(F, model);
      Mat2 fd;
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
          const double h = 1e-6;
          Mat2 p = F, m = F;
          p(i, j) += h;
          m(i, j) -= h;
          fd(i, j) = (stored_energy(p, model) - stored_energy(m, model)) / (2.0 * h);
        }
      }
      grad_worst = std::max(grad_worst, (a - fd).norm() / std::max(fd.norm(), 1e-8));
      const double th = angle(rng);
      Mat2 Q;
      Q << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
      const double phi = stored_energy(F, model);
      frame_worst = std::max(frame_worst, std::abs(stored_energy(Q * F, model) - phi) / (1.0 + phi));
      const Mat2 T = cauchy_stress_conservative(F, model);
      sym_worst = std::max(sym_worst, (T - T.transpose()).norm() / (1.0 + T.norm()));
    }
    out.push_back({"stored-energy gradient vs central differences", grad_worst, 1e-5, grad_worst < 1e-5});
    out.push_back({"frame indifference", frame_worst, 1e-12, frame_worst < 1e-12});
    out.push_back({"Cauchy stress symmetry", sym_worst, 1e-10, sym_worst < 1e-10});
  }
  {
    RunConfig eq = cfg;
    eq.velocity = "rest";
    eq.deformation = "identity";
    eq.body_force = "none";
    eq.traction = "none";
    eq.t_end = 20 * eq.dt;
    const Dynamics d(make_scenario(eq));
    RunOptions opt;
    opt.sample_stride = std::numeric_limits<int>::max();
    const RunResult r = run_trajectory(d, opt);
    double dev = 0.0;
    if (!r.aborted) {
      const std::array<Grid, 2> v = d.velocity_grids(r.final.v);
      const std::array<Grid, 4> F = d.deformation_grids(r.final.F);
      dev = std::max(v[0].cwiseAbs().maxCoeff(), v[1].cwiseAbs().maxCoeff());
      for (int c = 0; c < 4; ++c) {
        const double id = (c == 0 || c == 3) ? 1.0 : 0.0;
        dev = std::max(dev, (F[c].array() - id).abs().maxCoeff());
      }
      dev = std::max(dev, std::abs(r.ledger.residual));
    } else {
      dev = std::numeric_limits<double>::infinity();
    }
    out.push_back({"rest state is a fixed point", dev, 1e-11, dev < 1e-11});
  }
  {
    const bool same = parse_config(serialize_config(cfg)) == cfg;
    out.push_back({"config round trip", same ? 0.0 : 1.0, 0.0, same});
  }
  {
    SimState s = dyn.initial_state();
    const std::string bytes = encode_snapshot(make_snapshot(dyn, s));
    const bool same = encode_snapshot(decode_snapshot(bytes)) == bytes;
    out.push_back({"snapshot round trip", same ? 0.0 : 1.0, 0.0, same});
  }
  return out;
}

}  // namespace kvflow
