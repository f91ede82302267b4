// Command-line tool, driven as a subprocess: exit codes, artifact shapes,
// config validation, and byte-level determinism.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "json.hpp"

using json = nlohmann::json;

namespace {

std::string scratch_root() {
  static std::string root = [] {
    char tmpl[] = "/tmp/rotgas_cli_test_XXXXXX";
    char* p = mkdtemp(tmpl);
    REQUIRE(p != nullptr);
    return std::string(p);
  }();
  return root;
}

int seq_counter = 0;

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  REQUIRE(out.good());
}

json slurp_json(const std::string& path) {
  std::string text = slurp(path);
  REQUIRE(!text.empty());
  return json::parse(text);
}

RunResult run_cli(const std::string& args) {
  std::string dir = scratch_root();
  std::string so = dir + "/stdout." + std::to_string(seq_counter);
  std::string se = dir + "/stderr." + std::to_string(seq_counter);
  ++seq_counter;
  std::string cmd =
      std::string(RG_CLI_PATH) + " " + args + " >" + so + " 2>" + se;
  int rc = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = slurp(so);
  r.err = slurp(se);
  return r;
}

// Failed runs report one JSON object on stderr: {"error":{"code":..,...}}.
json error_payload(const RunResult& r) {
  json j = json::parse(r.err, nullptr, false);
  REQUIRE(!j.is_discarded());
  REQUIRE(j.contains("error"));
  return j.at("error");
}

}  // namespace

TEST_CASE("help and version exit cleanly, usage errors exit 2") {
  CHECK(run_cli("--help").exit_code == 0);
  RunResult v = run_cli("--version");
  CHECK(v.exit_code == 0);
  CHECK(v.out.find("rotgas") != std::string::npos);
  CHECK(run_cli("").exit_code == 2);  // a subcommand is required
  CHECK(run_cli("no-such-command").exit_code == 2);
}

TEST_CASE("channel: noninteracting spectrum lands in the CSV") {
  std::string dir = scratch_root() + "/chan0";
  std::string cfg = scratch_root() + "/chan0.json";
  spit(cfg, R"({
    "trap": {"radial_coeff": 1.0, "s": 2, "axial_coeff": 1.0, "p": 2},
    "coupling": 0.0,
    "grid": {"nr": 128, "nz": 128, "r_max": 8.0, "z_max": 8.0},
    "n_max": 2
  })");
  RunResult r =
      run_cli("channel --config " + cfg + " --out " + dir + " --seed 5");
  CHECK(r.exit_code == 0);

  std::string csv = slurp(dir + "/channel_scan.csv");
  REQUIRE(!csv.empty());
  CHECK(csv.rfind("# {", 0) == 0);  // metadata preamble on the first line
  CHECK(csv.find("\"seed\":5") != std::string::npos);
  CHECK(csv.find("n,energy,mu_tilde,residual,iterations,converged,quartic") !=
        std::string::npos);

  json out = slurp_json(dir + "/channel_scan.json");
  REQUIRE(out.at("rows").size() == 3);
  for (int n = 0; n < 3; ++n) {
    const json& row = out.at("rows").at(n);
    CHECK(row.at("n").get<int>() == n);
    // E_n(0) = 2n + 3 for the harmonic trap.
    CHECK(row.at("energy").get<double>() ==
          doctest::Approx(2.0 * n + 3.0).epsilon(2e-3));
    CHECK(row.at("converged").get<bool>());
  }
  CHECK(out.at("best_symmetric").at("n").get<int>() == 0);
  CHECK(out.at("best_symmetric").at("bracketed").get<bool>());
  CHECK(out.at("meta").at("seed").get<int>() == 5);
  CHECK(out.at("meta").at("config").at("coupling").get<double>() == 0.0);

  // The CSV row for n = 0 carries the same energy.
  std::istringstream lines(csv);
  std::string line;
  bool found = false;
  while (std::getline(lines, line)) {
    if (line.rfind("0,", 0) == 0) {
      double e = std::atof(line.c_str() + 2);
      CHECK(e ==
            doctest::Approx(out.at("rows").at(0).at("energy").get<double>()));
      found = true;
      break;
    }
  }
  CHECK(found);
}

TEST_CASE("config validation: unknown keys are named, parse errors exit 2") {
  std::string cfg = scratch_root() + "/bad_key.json";
  spit(cfg, R"({"trap": {"radial_coeff": 1.0, "sss": 2}})");
  RunResult r = run_cli("channel --config " + cfg + " --out " +
                        scratch_root() + "/bad_key");
  CHECK(r.exit_code == 2);
  json err = error_payload(r);
  CHECK(err.at("code").get<int>() == 2);
  CHECK(err.at("message").get<std::string>().find("trap.sss") !=
        std::string::npos);

  std::string broken = scratch_root() + "/broken.json";
  spit(broken, "{ not json");
  RunResult r2 = run_cli("channel --config " + broken + " --out " +
                         scratch_root() + "/broken");
  CHECK(r2.exit_code == 2);
  CHECK(error_payload(r2).at("code").get<int>() == 2);

  // A config path that does not exist is an I/O failure, not a syntax one.
  RunResult r3 = run_cli("channel --config " + scratch_root() +
                         "/does_not_exist.json --out " + scratch_root() +
                         "/missing");
  CHECK(r3.exit_code == 4);
  CHECK(error_payload(r3).at("code").get<int>() == 4);

  // Wrong value type for a numeric field.
  std::string typed = scratch_root() + "/typed.json";
  spit(typed, R"({"coupling": "ten"})");
  RunResult r4 = run_cli("channel --config " + typed + " --out " +
                         scratch_root() + "/typed");
  CHECK(r4.exit_code == 2);
  CHECK(error_payload(r4).at("message").get<std::string>().find("coupling") !=
        std::string::npos);
}

TEST_CASE("supercritical rotation is rejected before any compute") {
  std::string cfg = scratch_root() + "/fast.json";
  spit(cfg, R"({
    "trap": {"radial_coeff": 1.0, "s": 2, "axial_coeff": 1.0, "p": 2},
    "omega": 2.5, "coupling": 1.0,
    "grid": {"nr": 96, "nz": 96, "r_max": 8.0, "z_max": 8.0}
  })");
  RunResult r =
      run_cli("dm --config " + cfg + " --out " + scratch_root() + "/fast");
  CHECK(r.exit_code == 2);
  json err = error_payload(r);
  CHECK(err.at("code").get<int>() == 2);
  CHECK(err.at("message").get<std::string>().find("critical") !=
        std::string::npos);
}

TEST_CASE("starved dm solve writes its artifact and exits 3") {
  std::string cfg = scratch_root() + "/starved.json";
  spit(cfg, R"({
    "trap": {"radial_coeff": 1.0, "s": 2, "axial_coeff": 1.0, "p": 2},
    "omega": 1.8, "coupling": 50.0, "max_iter": 1,
    "grid": {"nr": 96, "nz": 96, "r_max": 8.0, "z_max": 8.0}
  })");
  std::string dir = scratch_root() + "/starved";
  RunResult r = run_cli("dm --config " + cfg + " --out " + dir);
  CHECK(r.exit_code == 3);
  CHECK(error_payload(r).at("code").get<int>() == 3);
  json out = slurp_json(dir + "/dm_result.json");
  CHECK(!out.at("converged").get<bool>());
  CHECK(out.at("iterations").get<int>() <= 1);
}

TEST_CASE("unwritable output directory exits with the io code") {
  std::string cfg = scratch_root() + "/io.json";
  spit(cfg, R"({"n_particles": 2, "n_modes": 3, "omega": 0.0,
               "coupling": 1.0})");
  RunResult r = run_cli("toy --config " + cfg + " --out /proc/rotgas_nope");
  CHECK(r.exit_code == 4);
  CHECK(error_payload(r).at("code").get<int>() == 4);
}

TEST_CASE("dm at zero coupling maps to the channel eigenproblem") {
  std::string cfg = scratch_root() + "/dm0.json";
  spit(cfg, R"({
    "trap": {"radial_coeff": 1.0, "s": 2, "axial_coeff": 1.0, "p": 2},
    "omega": 0.5, "coupling": 0.0,
    "grid": {"nr": 96, "nz": 96, "r_max": 8.0, "z_max": 8.0}
  })");
  std::string dir = scratch_root() + "/dm0";
  RunResult r = run_cli("dm --config " + cfg + " --out " + dir + " --seed 3");
  CHECK(r.exit_code == 0);
  json out = slurp_json(dir + "/dm_result.json");
  CHECK(out.at("rank").get<int>() == 1);
  CHECK(out.at("energy").get<double>() == doctest::Approx(3.0).epsilon(5e-3));
  REQUIRE(out.at("occupations").size() == 1);
  CHECK(out.at("occupations").at(0).at("n").get<int>() == 0);
  CHECK(out.at("occupations").at(0).at("lambda").get<double>() == 1.0);
  CHECK(out.at("lz_variance").get<double>() == 0.0);
  CHECK(out.at("converged").get<bool>());
}

TEST_CASE("toy artifacts are byte-identical across reruns") {
  std::string cfg = scratch_root() + "/toy.json";
  spit(cfg, R"({"n_particles": 2, "n_modes": 3, "omega": 1.8,
               "coupling": 5.0})");
  std::string d1 = scratch_root() + "/toy_run1";
  std::string d2 = scratch_root() + "/toy_run2";
  CHECK(run_cli("toy --config " + cfg + " --out " + d1 + " --seed 11")
            .exit_code == 0);
  CHECK(run_cli("toy --config " + cfg + " --out " + d2 + " --seed 11")
            .exit_code == 0);
  std::string a = slurp(d1 + "/toy_result.json");
  std::string b = slurp(d2 + "/toy_result.json");
  REQUIRE(!a.empty());
  CHECK(a == b);
  CHECK(slurp(d1 + "/toy_rdm.csv") == slurp(d2 + "/toy_rdm.csv"));

  json out = json::parse(a);
  CHECK(out.at("gap").get<double>() == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(out.at("sector_label").get<std::string>() == "non-symmetric");
  CHECK(out.at("meta").at("seed").get<int>() == 11);
  // Leading reduced-density-matrix eigenvalue first in the artifact.
  CHECK(out.at("rdm_eigenvalues").at(0).get<double>() ==
        doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("phase scan artifacts: row per point plus a metadata sidecar") {
  std::string cfg = scratch_root() + "/phase.json";
  spit(cfg, R"({
    "trap": {"radial_coeff": 1.0, "s": 2, "axial_coeff": 1.0, "p": 2},
    "omega_list": [0.0, 0.5],
    "g_list": [1.0],
    "with_3d": false,
    "refine": 1
  })");
  std::string dir = scratch_root() + "/phase";
  RunResult r = run_cli("phase --config " + cfg + " --out " + dir +
                        " --seed 9 --threads 1");
  CHECK(r.exit_code == 0);

  std::string csv = slurp(dir + "/phase_scan.csv");
  REQUIRE(!csv.empty());
  int rows = 0;
  std::istringstream lines(csv);
  std::string line;
  std::string header;
  while (std::getline(lines, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header.empty()) {
      header = line;
      continue;
    }
    ++rows;
  }
  CHECK(rows == 2);
  CHECK(header.find("omega,g,e_gp_3d,e_gp_channel,e_dm,margin") == 0);

  json meta = slurp_json(dir + "/phase_meta.json");
  CHECK(meta.at("points").get<int>() == 2);
  // Nothing breaks symmetry this far below the nucleation threshold.
  CHECK(meta.at("symmetry_broken_point").is_null());
  CHECK(meta.at("meta").at("config").at("omega_list").size() == 2);

  // Duplicate axis values are a config error.
  std::string dup = scratch_root() + "/dup.json";
  spit(dup, R"({
    "trap": {"radial_coeff": 1.0, "s": 2, "axial_coeff": 1.0, "p": 2},
    "omega_list": [0.5, 0.5], "g_list": [1.0], "with_3d": false
  })");
  CHECK(run_cli("phase --config " + dup + " --out " + scratch_root() + "/dup")
            .exit_code == 2);
}

TEST_CASE("gp3d: converged artifact with config echo and slices") {
  std::string cfg = scratch_root() + "/gp.json";
  spit(cfg, R"({
    "trap": {"radial_coeff": 1.0, "s": 2, "axial_coeff": 1.0, "p": 2},
    "omega": 0.0, "coupling": 5.0,
    "grid": {"n": 32, "half_extent": 6.0},
    "write_slices": true
  })");
  std::string dir = scratch_root() + "/gp";
  RunResult r = run_cli("gp3d --config " + cfg + " --out " + dir + " --seed 2");
  CHECK(r.exit_code == 0);
  json out = slurp_json(dir + "/gp3d_result.json");
  CHECK(out.at("converged").get<bool>());
  CHECK(out.at("meta").at("config").at("grid").at("half_extent")
            .get<double>() == 6.0);
  // mu = E + 4 pi g * quartic holds exactly in the artifact too.
  double e = out.at("energy").get<double>();
  double q = out.at("quartic").get<double>();
  double mu = out.at("mu").get<double>();
  CHECK(mu == e + 4.0 * 3.14159265358979323846 * 5.0 * q);
  CHECK(out.at("vortices").is_array());
  CHECK(!slurp(dir + "/gp3d_density.csv").empty());
  CHECK(!slurp(dir + "/gp3d_phase.csv").empty());
  CHECK(!slurp(dir + "/gp3d_vortices.csv").empty());
}

TEST_CASE("stability: per-row q values and summary in the json") {
  std::string cfg = scratch_root() + "/stab.json";
  spit(cfg, R"({
    "trap": {"radial_coeff": 1.0, "s": 2, "axial_coeff": 1.0, "p": 2},
    "omega": 1.8, "coupling": 100.0,
    "grid": {"nr": 128, "nz": 96, "r_max": 8.0, "z_max": 8.0},
    "n_list": [64, 128],
    "L_grid": [0.5, 1.0, 2.0]
  })");
  std::string dir = scratch_root() + "/stab";
  RunResult r =
      run_cli("stability --config " + cfg + " --out " + dir + " --seed 1");
  CHECK(r.exit_code == 0);
  json out = slurp_json(dir + "/stability.json");
  CHECK(out.at("summary").at("any_unstable").get<bool>());
  CHECK(out.at("summary").at("first_unstable_n").get<int>() == 128);
  REQUIRE(out.at("rows").size() == 2);
  CHECK(!out.at("rows").at(0).at("unstable").get<bool>());
  CHECK(out.at("rows").at(1).at("unstable").get<bool>());
  CHECK(out.at("rows").at(1).at("q_by_L").size() == 3);
  std::string csv = slurp(dir + "/stability.csv");
  CHECK(csv.find("n,e_channel,mu_tilde,c_n,L_best,q_min,unstable") !=
        std::string::npos);
}

TEST_CASE("command-line overrides beat config values") {
  std::string cfg = scratch_root() + "/ovr.json";
  spit(cfg, R"({"n_particles": 2, "n_modes": 3, "omega": 0.0,
               "coupling": 5.0})");
  std::string dir = scratch_root() + "/ovr";
  RunResult r = run_cli("toy --config " + cfg + " --out " + dir +
                        " --omega 1.8 --seed 4");
  CHECK(r.exit_code == 0);
  json out = slurp_json(dir + "/toy_result.json");
  CHECK(out.at("omega").get<double>() == 1.8);
  CHECK(out.at("gap").get<double>() == doctest::Approx(0.2).epsilon(1e-9));
}
