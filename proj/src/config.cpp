#include "kvflow/config.hpp"

#include "kvflow/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

namespace kvflow {

namespace {

using Setter = std::function<void(RunConfig&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Field {
  std::string section;
  std::string key;
  Setter set;
  Getter get;
};

std::string qualified(const std::string& s, const std::string& k) { return s + "." + k; }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& text, const std::string& where) {
  const std::string s = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(where + ": expected a number, got '" + text + "'");
  }
  if (!std::isfinite(v)) throw ConfigError(where + ": value must be finite");
  return v;
}

int parse_int(const std::string& text, const std::string& where) {
  const std::string s = trim(text);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(where + ": expected an integer, got '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& text, const std::string& where) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(where + ": expected true/false, got '" + text + "'");
}

std::vector<double> parse_list(const std::string& text, const std::string& where) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(parse_double(item, where));
  }
  return out;
}

std::string format_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += format_double(v[i]);
  }
  return s;
}

template <class Acc>
Field dbl(std::string s, std::string k, Acc acc) {
  const std::string where = qualified(s, k);
  return {s, k, [acc, where](RunConfig& c, const std::string& v) { acc(c) = parse_double(v, where); },
          [acc](const RunConfig& c) { return format_double(acc(c)); }};
}

template <class Acc>
Field integer(std::string s, std::string k, Acc acc) {
  const std::string where = qualified(s, k);
  return {s, k, [acc, where](RunConfig& c, const std::string& v) { acc(c) = parse_int(v, where); },
          [acc](const RunConfig& c) { return std::to_string(acc(c)); }};
}

template <class Acc>
Field text(std::string s, std::string k, Acc acc) {
  return {s, k, [acc](RunConfig& c, const std::string& v) { acc(c) = trim(v); },
          [acc](const RunConfig& c) { return acc(c); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(text("scenario", "name", [](auto& c) -> auto& { return c.name; }));
    f.push_back(dbl("domain", "lx", [](auto& c) -> auto& { return c.domain.lx; }));
    f.push_back(dbl("domain", "ly", [](auto& c) -> auto& { return c.domain.ly; }));
    f.push_back(integer("discretization", "nx", [](auto& c) -> auto& { return c.nx; }));
    f.push_back(integer("discretization", "ny", [](auto& c) -> auto& { return c.ny; }));
    f.push_back(integer("discretization", "mx", [](auto& c) -> auto& { return c.mx; }));
    f.push_back(integer("discretization", "my", [](auto& c) -> auto& { return c.my; }));
    f.push_back(dbl("material", "rho", [](auto& c) -> auto& { return c.material.rho; }));
    f.push_back(dbl("material", "visc_lambda", [](auto& c) -> auto& { return c.material.visc_lambda; }));
    f.push_back(dbl("material", "visc_mu", [](auto& c) -> auto& { return c.material.visc_mu; }));
    f.push_back(dbl("material", "nu", [](auto& c) -> auto& { return c.material.nu; }));
    f.push_back(dbl("material", "p", [](auto& c) -> auto& { return c.material.p; }));
    f.push_back(dbl("material", "bulk", [](auto& c) -> auto& { return c.material.bulk; }));
    f.push_back(dbl("material", "shear", [](auto& c) -> auto& { return c.material.shear; }));
    f.push_back(dbl("material", "eta", [](auto& c) -> auto& { return c.material.eta; }));
    f.push_back(dbl("material", "eps", [](auto& c) -> auto& { return c.material.eps; }));
    f.push_back({"material", "energy",
                 [](RunConfig& c, const std::string& v) { c.energy = energy_kind_from_string(trim(v)); },
                 [](const RunConfig& c) { return to_string(c.energy); }});
    f.push_back(dbl("material", "det_penalty", [](auto& c) -> auto& { return c.det_penalty; }));
    f.push_back(dbl("time", "t_end", [](auto& c) -> auto& { return c.t_end; }));
    f.push_back(dbl("time", "dt", [](auto& c) -> auto& { return c.dt; }));
    f.push_back(dbl("time", "stiff_threshold",
                    [](auto& c) -> auto& { return c.integrator.stiff_threshold; }));
    f.push_back(dbl("time", "shift_safety", [](auto& c) -> auto& { return c.integrator.shift_safety; }));
    f.push_back(text("initial", "velocity", [](auto& c) -> auto& { return c.velocity; }));
    f.push_back(dbl("initial", "velocity_amplitude", [](auto& c) -> auto& { return c.velocity_amplitude; }));
    f.push_back(text("initial", "deformation", [](auto& c) -> auto& { return c.deformation; }));
    f.push_back(dbl("initial", "deformation_amplitude",
                    [](auto& c) -> auto& { return c.deformation_amplitude; }));
    f.push_back(text("load", "body_force", [](auto& c) -> auto& { return c.body_force; }));
    f.push_back(dbl("load", "body_amplitude", [](auto& c) -> auto& { return c.body_amplitude; }));
    f.push_back(text("load", "traction", [](auto& c) -> auto& { return c.traction; }));
    f.push_back(dbl("load", "traction_amplitude", [](auto& c) -> auto& { return c.traction_amplitude; }));
    f.push_back(text("output", "directory", [](auto& c) -> auto& { return c.output_dir; }));
    f.push_back(integer("output", "sample_stride", [](auto& c) -> auto& { return c.sample_stride; }));
    f.push_back(integer("output", "snapshot_stride", [](auto& c) -> auto& { return c.snapshot_stride; }));
    f.push_back(text("experiment", "sweep_mode", [](auto& c) -> auto& { return c.sweep_mode; }));
    f.push_back({"experiment", "values",
                 [](RunConfig& c, const std::string& v) { c.sweep_values = parse_list(v, "experiment.values"); },
                 [](const RunConfig& c) { return format_list(c.sweep_values); }});
    f.push_back({"validation", "eta_zero",
                 [](RunConfig& c, const std::string& v) {
                   const std::string s = trim(v);
                   if (s == "warn") c.eta_zero = EtaZeroPolicy::warn;
                   else if (s == "error") c.eta_zero = EtaZeroPolicy::error;
                   else if (s == "ignore") c.eta_zero = EtaZeroPolicy::ignore;
                   else throw ConfigError("validation.eta_zero: expected warn|error|ignore, got '" + s + "'");
                 },
                 [](const RunConfig& c) { return to_string(c.eta_zero); }});
    f.push_back({"validation", "strict_exponent",
                 [](RunConfig& c, const std::string& v) {
                   c.strict_exponent = parse_bool(v, "validation.strict_exponent");
                 },
                 [](const RunConfig& c) { return std::string(c.strict_exponent ? "true" : "false"); }});
    return f;
  }();
  return table;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const Field& f : fields()) {
    if (f.section == section && f.key == key) return &f;
  }
  return nullptr;
}

bool known_section(const std::string& section) {
  for (const Field& f : fields()) {
    if (f.section == section) return true;
  }
  return false;
}

void require(bool ok, const std::string& rule) {
  if (!ok) throw ConfigError("configuration violates " + rule);
}

bool one_of(const std::string& s, std::initializer_list<const char*> options) {
  for (const char* o : options) {
    if (s == o) return true;
  }
  return false;
}

}  // namespace

std::string to_string(EtaZeroPolicy p) {
  switch (p) {
    case EtaZeroPolicy::warn: return "warn";
    case EtaZeroPolicy::error: return "error";
    case EtaZeroPolicy::ignore: return "ignore";
  }
  return "?";
}

void validate_config(const RunConfig& c, std::vector<std::string>* warnings) {
  require(!c.name.empty(), "scenario.name must be non-empty");
  for (char ch : c.name) {
    const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.';
    require(ok, "scenario.name may only contain letters, digits, '_', '-', '.'");
  }
  c.domain.validate();
  require(c.nx >= 2 && c.ny >= 2, "nx, ny >= 2");
  require(c.mx == 0 || c.mx >= (3 * c.nx + 1) / 2, "mx = 0 or mx >= ceil(3 nx / 2)");
  require(c.my == 0 || c.my >= (3 * c.ny + 1) / 2, "my = 0 or my >= ceil(3 ny / 2)");
  c.material.validate(c.strict_exponent);
  require(c.energy != EnergyKind::custom, "material.energy: custom energies need code, not a config");
  require(c.det_penalty >= 0.0, "material.det_penalty >= 0");
  require(c.t_end >= 0.0, "time.t_end >= 0");
  require(c.dt > 0.0, "time.dt > 0");
  require(c.integrator.stiff_threshold > 0.0, "time.stiff_threshold > 0");
  require(c.integrator.shift_safety >= 1.0, "time.shift_safety >= 1");
  require(one_of(c.velocity, {"rest", "stream", "potential", "mixed"}),
          "initial.velocity in {rest, stream, potential, mixed}");
  require(one_of(c.deformation, {"identity", "shear", "stretch"}),
          "initial.deformation in {identity, shear, stretch}");
  require(one_of(c.body_force, {"none", "mode", "pulse"}), "load.body_force in {none, mode, pulse}");
  require(one_of(c.traction, {"none", "shear"}), "load.traction in {none, shear}");
  require(!c.output_dir.empty(), "output.directory must be non-empty");
  require(c.sample_stride >= 1, "output.sample_stride >= 1");
  require(c.snapshot_stride >= 0, "output.snapshot_stride >= 0");
  require(one_of(c.sweep_mode, {"viscous", "elastic"}), "experiment.sweep_mode in {viscous, elastic}");

  const bool eta_zero = c.energy == EnergyKind::svk || c.material.eta == 0.0;
  if (eta_zero) {
    const std::string msg =
        "eta = 0: the stored energy has quadratic growth, so the linear-growth bound on phi does not hold";
    if (c.eta_zero == EtaZeroPolicy::error) throw ConfigError("configuration violates eta > 0 (" + msg + ")");
    if (c.eta_zero == EtaZeroPolicy::warn && warnings) warnings->push_back(msg);
  }
}

RunConfig parse_config(const std::string& text, std::vector<std::string>* warnings) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  RunConfig c;
  bool have_name = false;
  for (const auto& [section, node] : tree) {
    if (node.empty()) {
      throw ConfigError("unknown key '" + section + "' outside any section");
    }
    if (!known_section(section)) throw ConfigError("unknown section [" + section + "]");
    for (const auto& [key, value] : node) {
      const Field* f = find_field(section, key);
      if (!f) throw ConfigError("unknown key '" + qualified(section, key) + "'");
      if (!value.empty()) throw ConfigError("nested value under '" + qualified(section, key) + "'");
      f->set(c, value.data());
      if (section == "scenario" && key == "name") have_name = true;
    }
  }
  if (!have_name) throw ConfigError("missing required key 'scenario.name'");
  validate_config(c, warnings);
  return c;
}

RunConfig load_config(const std::string& path, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), warnings);
}

std::string serialize_config(const RunConfig& c) {
  std::string out;
  std::string current;
  for (const Field& f : fields()) {
    if (f.section != current) {
      if (!current.empty()) out += "\n";
      out += "[" + f.section + "]\n";
      current = f.section;
    }
    out += f.key + " = " + f.get(c) + "\n";
  }
  return out;
}

Scenario make_scenario(const RunConfig& c) {
  constexpr double pi = std::numbers::pi;
  Scenario s;
  s.name = c.name;
  s.domain = c.domain;
  s.nx = c.nx;
  s.ny = c.ny;
  s.mx = c.mx;
  s.my = c.my;
  s.material = c.material;
  s.energy = StoredEnergyModel::from(c.material, c.energy);
  s.energy.det_penalty = c.det_penalty;
  s.t_end = c.t_end;
  s.dt = c.dt;
  s.integrator = c.integrator;

  const double lx = c.domain.lx;
  const double ly = c.domain.ly;
  const double a = c.velocity_amplitude;
  // curl-free companion of the stream-function field
  const auto potential = [=](double amp) {
    return [=](double x, double y) {
      return Vec2(amp * std::sin(pi * x / lx) * std::cos(pi * y / ly),
                  amp * (lx / ly) * std::cos(pi * x / lx) * std::sin(pi * y / ly));
    };
  };
  if (c.velocity == "stream") {
    s.v0 = stream_function_velocity(c.domain, a);
  } else if (c.velocity == "potential") {
    s.v0 = potential(a);
  } else if (c.velocity == "mixed") {
    const VectorFn st = stream_function_velocity(c.domain, a);
    const auto po = potential(0.5 * a);
    s.v0 = [st, po](double x, double y) { return Vec2(st(x, y) + po(x, y)); };
  }

  const double fa = c.deformation_amplitude;
  if (c.deformation == "shear") {
    s.F0 = [=](double x, double y) {
      Mat2 F = Mat2::Identity();
      F(0, 1) = fa * std::sin(pi * x / lx) * std::sin(pi * y / ly);
      return F;
    };
  } else if (c.deformation == "stretch") {
    s.F0 = [=](double x, double y) {
      const double m = fa * std::cos(pi * x / lx) * std::cos(pi * y / ly);
      Mat2 F = Mat2::Identity();
      F(0, 0) += m;
      F(1, 1) -= m;
      return F;
    };
  }

  const double ba = c.body_amplitude;
  if (c.body_force == "mode") {
    s.body_force = [=](double, double x, double y) {
      return Vec2(ba * std::sin(pi * x / lx) * std::cos(pi * y / ly), 0.0);
    };
  } else if (c.body_force == "pulse") {
    const VectorFn shape = stream_function_velocity(c.domain, ba);
    s.body_force = [shape](double t, double x, double y) { return Vec2(std::exp(-t) * shape(x, y)); };
  }

  const double ta = c.traction_amplitude;
  if (c.traction == "shear") {
    s.traction = [=](double, double x, double y) {
      const double tol = 1e-12 * std::max(lx, ly);
      if (std::abs(y) <= tol) return Vec2(ta * std::sin(pi * x / lx), 0.0);
      if (std::abs(y - ly) <= tol) return Vec2(-ta * std::sin(pi * x / lx), 0.0);
      return Vec2(0.0, ta * std::sin(pi * y / ly));
    };
  }
  return s;
}

}  // namespace kvflow
