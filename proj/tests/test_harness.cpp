#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kvflow/errors.hpp"
#include "kvflow/simulation.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace kvflow;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"([scenario]
name = small
[discretization]
nx = 8
ny = 8
[time]
t_end = 0.02
dt = 0.005
[output]
sample_stride = 1
)";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("kvflow_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig random_config(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> n(4, 64);
  RunConfig c;
  c.name = "fuzz" + std::to_string(n(rng));
  c.domain = {0.5 + u(rng), 0.5 + u(rng)};
  c.nx = n(rng);
  c.ny = n(rng);
  c.material.rho = 0.1 + u(rng);
  c.material.visc_lambda = u(rng);
  c.material.visc_mu = 1e-3 + u(rng);
  c.material.nu = 1e-4 + u(rng);
  c.material.p = 2.0 + 1e-3 + 3.0 * u(rng);
  c.material.bulk = 0.1 + 10.0 * u(rng);
  c.material.shear = 0.1 + u(rng);
  c.material.eta = 1e-3 + u(rng);
  c.material.eps = u(rng) < 0.5 ? 0.0 : u(rng);
  c.t_end = u(rng);
  c.dt = 1e-4 + 1e-2 * u(rng);
  c.integrator.shift_safety = 1.0 + u(rng);
  c.velocity = u(rng) < 0.5 ? "stream" : "mixed";
  c.velocity_amplitude = u(rng);
  c.deformation = u(rng) < 0.5 ? "identity" : "shear";
  c.deformation_amplitude = 0.1 * u(rng);
  c.sample_stride = n(rng);
  c.sweep_values = {u(rng), u(rng), u(rng)};
  return c;
}

}  // namespace

TEST_CASE("config round trip is exact") {
  const RunConfig c = parse_config(kSmall);
  CHECK(c.name == "small");
  CHECK(c.nx == 8);
  CHECK(parse_config(serialize_config(c)) == c);

  std::mt19937_64 rng(51);
  for (int k = 0; k < 200; ++k) {
    const RunConfig r = random_config(rng);
    REQUIRE_NOTHROW(validate_config(r));
    CHECK(parse_config(serialize_config(r)) == r);
  }
}

TEST_CASE("config errors name the offending key or rule") {
  CHECK_THROWS_WITH_AS(parse_config("[scenario]\nname = x\n[material]\ncolour = red\n"),
                       doctest::Contains("colour"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[scenari]\nname = x\n"), doctest::Contains("scenari"), ConfigError);
  CHECK_THROWS_AS(parse_config("[domain]\nlx = 1\n"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[scenario]\nname = x\n[material]\np = 2\n"), doctest::Contains("p > d"),
                       ConfigError);
  CHECK_NOTHROW(parse_config("[scenario]\nname = x\n[material]\np = 2\n[validation]\nstrict_exponent = false\n"));
  CHECK_THROWS_AS(parse_config("[scenario]\nname = x\n[discretization]\nnx = eight\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[scenario]\nname = x\n[time]\ndt = -1\n"), ConfigError);
}

TEST_CASE("eta = 0 policy") {
  const std::string text = "[scenario]\nname = x\n[material]\neta = 0\n";
  std::vector<std::string> warnings;
  CHECK_NOTHROW(parse_config(text, &warnings));
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("eta = 0") != std::string::npos);
  CHECK_THROWS_AS(parse_config(text + "[validation]\neta_zero = error\n"), ConfigError);
  warnings.clear();
  CHECK_NOTHROW(parse_config(text + "[validation]\neta_zero = ignore\n", &warnings));
  CHECK(warnings.empty());
}

TEST_CASE("garbage input only raises configuration errors") {
  std::mt19937_64 rng(52);
  const std::string alphabet = "[]=\n #;abcdemnpstxyz0123456789.-e_";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  for (int k = 0; k < 500; ++k) {
    std::string s = k % 2 ? std::string(kSmall) : std::string();
    const std::size_t at = s.empty() ? 0 : pick(rng) % s.size();
    std::string noise;
    for (int i = 0; i < 40; ++i) noise += alphabet[pick(rng)];
    s.insert(at, noise);
    try {
      parse_config(s);
    } catch (const ConfigError&) {
    }
  }
}

TEST_CASE("snapshot encoding") {
  Snapshot s;
  s.nx = 4;
  s.ny = 3;
  s.mx = 6;
  s.my = 5;
  s.lx = 1.5;
  s.ly = 0.25;
  s.t = 0.125;
  s.names = {"a", "bb"};
  s.fields = {Grid::Random(6, 5), Grid::Random(6, 5)};
  const std::string bytes = encode_snapshot(s);
  CHECK(bytes.substr(0, 6) == "KVSNAP");
  CHECK(bytes.size() == 8 + 4 + 16 + 24 + 4 + (4 + 1) + (4 + 2) + 2 * 30 * 8);
  const Snapshot d = decode_snapshot(bytes);
  CHECK(d.names == s.names);
  CHECK(d.t == s.t);
  CHECK(d.fields[1] == s.fields[1]);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_snapshot(bad), ValidationError);
  CHECK_THROWS_AS(decode_snapshot(bytes.substr(0, bytes.size() - 1)), ValidationError);
}

TEST_CASE("runs are deterministic and write the documented artefacts") {
  const fs::path dir = scratch("determinism");
  RunConfig c = parse_config(kSmall);
  c.output_dir = (dir / "a").string();
  const RunSummary a = run_scenario(c);
  c.output_dir = (dir / "b").string();
  const RunSummary b = run_scenario(c);
  CHECK(a.exit_code == 0);
  CHECK(slurp(a.csv_path) == slurp(b.csv_path));
  CHECK(slurp(dir / "a" / "small_000000.kvsnap") == slurp(dir / "b" / "small_000000.kvsnap"));
  CHECK(fs::exists(dir / "a" / "small_000004.kvsnap"));
  RunConfig echo = parse_config(slurp(dir / "b" / "small.ini"));
  CHECK(echo == c);

  std::istringstream csv(slurp(a.csv_path));
  std::string line;
  std::getline(csv, line);
  CHECK(line == csv_header());
  int rows = 0;
  std::string last;
  while (std::getline(csv, line)) {
    ++rows;
    last = line;
  }
  CHECK(rows == 5);
  CHECK(last.rfind("0.02,", 0) == 0);
}

TEST_CASE("t_end = 0 writes one row and one snapshot") {
  const fs::path dir = scratch("zero");
  RunConfig c = parse_config(kSmall);
  c.t_end = 0.0;
  c.output_dir = dir.string();
  const RunSummary s = run_scenario(c);
  CHECK(s.exit_code == 0);
  CHECK(s.result.rows.size() == 1);
  CHECK(s.snapshot_paths.size() == 1);
  const Snapshot snap = read_snapshot(s.snapshot_paths[0]);
  CHECK(snap.t == 0.0);
  CHECK(snap.names.back() == "detF");
}

TEST_CASE("numerical blow-up aborts with exit code 3 and keeps rows") {
  const fs::path dir = scratch("abort");
  RunConfig c = parse_config(kSmall);
  c.velocity_amplitude = 1e6;
  c.dt = 0.01;
  c.t_end = 1.0;
  c.output_dir = dir.string();
  const RunSummary s = run_scenario(c);
  CHECK(s.exit_code == 3);
  CHECK(s.result.aborted);
  CHECK(s.message.find("non-finite") != std::string::npos);
  CHECK(!s.result.rows.empty());
}

TEST_CASE("property suite passes on a small discretisation") {
  RunConfig c = parse_config(kSmall);
  c.nx = c.ny = 12;
  for (const PropertyCheck& p : verify_properties(c, 12345)) {
    INFO(p.name << " = " << p.value << " (tol " << p.tolerance << ")");
    CHECK(p.pass);
  }
}

TEST_CASE("sweeps") {
  RunConfig c = parse_config(kSmall);
  CHECK_THROWS_AS(sweep_incompressible_limit(c, {1.0, 10.0}, BulkMode::viscous), ConfigError);
  const SweepResult k = sweep_incompressible_limit(c, {1.0, 10.0, 100.0}, BulkMode::viscous);
  CHECK(k.complete);
  CHECK(k.rows.size() == 3);
  CHECK(k.slope < 0.0);
  const SweepResult e = sweep_epsilon(c, {1e-2, 1e-3});
  CHECK(e.rows.size() == 2);
  CHECK(e.monotone);
  CHECK(sweep_csv(e, "eps", "dist").rfind("eps,dist\n", 0) == 0);
  CHECK(bulk_mode_from_string("elastic") == BulkMode::elastic);
  CHECK_THROWS_AS(bulk_mode_from_string("both"), ConfigError);
}

#ifdef KVFLOW_CLI_PATH
TEST_CASE("command-line exit codes") {
  const fs::path dir = scratch("cli");
  const auto run = [&](const std::string& args) {
    const std::string cmd = std::string(KVFLOW_CLI_PATH) + " --output-dir " + (dir / "out").string() + " " + args +
                            " > " + (dir / "log").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  std::ofstream(dir / "ok.ini") << kSmall;
  std::ofstream(dir / "bad.ini") << "[scenario]\nname = bad\n[material]\nbogus = 1\n";
  CHECK(run("run " + (dir / "ok.ini").string()) == 0);
  CHECK(fs::exists(dir / "out" / "small.csv"));
  CHECK(run("run " + (dir / "bad.ini").string()) == 2);
  CHECK(run("run " + (dir / "missing.ini").string()) == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("verify " + (dir / "ok.ini").string()) == 0);
}
#endif
