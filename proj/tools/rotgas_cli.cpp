// rotgas command-line driver.
//
// Subcommands: channel, dm, gp3d, stability, phase, toy. Parameters come
// from a JSON config file (--config) with optional flag overrides; every
// artifact embeds the fully resolved configuration and the seed, files are
// written atomically (write-then-rename), and exit codes follow the library
// status taxonomy: 0 success, 2 configuration, 3 convergence, 4 I/O.
//
// The driver talks to the solver library exclusively through its C
// interface (rotgas.h).

#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rotgas.h"

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct CliError {
  int code;
  std::string message;
};

[[noreturn]] void die(int code, const std::string& msg) {
  throw CliError{code, msg};
}

void check(rg_status st) {
  if (st != RG_OK) die(st, rg_error_message());
}

/* ---- handle RAII --------------------------------------------------------- */

template <typename T, void (*Destroy)(T*)>
struct HandleDeleter {
  void operator()(T* p) const { Destroy(p); }
};
template <typename T, void (*Destroy)(T*)>
using Handle = std::unique_ptr<T, HandleDeleter<T, Destroy>>;

using TrapPtr = Handle<rg_trap, rg_trap_destroy>;
using Grid2Ptr = Handle<rg_grid2, rg_grid2_destroy>;
using Grid3Ptr = Handle<rg_grid3, rg_grid3_destroy>;
using ChanScanPtr = Handle<rg_channel_scan, rg_channel_scan_destroy>;
using DmPtr = Handle<rg_dm_result, rg_dm_result_destroy>;
using GpPtr = Handle<rg_gp_result, rg_gp_result_destroy>;
using StabPtr = Handle<rg_stability_report, rg_stability_report_destroy>;
using PhasePtr = Handle<rg_phase_scan, rg_phase_scan_destroy>;
using GapPtr = Handle<rg_gap_decay, rg_gap_decay_destroy>;
using ToyPtr = Handle<rg_toy_result, rg_toy_result_destroy>;

/* ---- strict config walking ------------------------------------------------ */

json load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) die(RG_ERR_IO, "cannot open config file: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    die(RG_ERR_INVALID, std::string("config: ") + e.what());
  }
}

// Tracks which keys of one JSON object were consumed; done() rejects the
// rest so typos surface as errors with their full field path.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      die(RG_ERR_INVALID, "config: '" + loc("") + "' must be an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  double num(const char* key, double fallback) {
    if (!j_.contains(key)) return fallback;
    mark(key);
    const json& v = j_.at(key);
    if (!v.is_number())
      die(RG_ERR_INVALID, "config: '" + loc(key) + "' must be a number");
    return v.get<double>();
  }

  std::int64_t integer(const char* key, std::int64_t fallback) {
    if (!j_.contains(key)) return fallback;
    mark(key);
    const json& v = j_.at(key);
    if (!v.is_number_integer())
      die(RG_ERR_INVALID, "config: '" + loc(key) + "' must be an integer");
    return v.get<std::int64_t>();
  }

  bool boolean(const char* key, bool fallback) {
    if (!j_.contains(key)) return fallback;
    mark(key);
    const json& v = j_.at(key);
    if (!v.is_boolean())
      die(RG_ERR_INVALID, "config: '" + loc(key) + "' must be a boolean");
    return v.get<bool>();
  }

  std::string str(const char* key, std::string fallback) {
    if (!j_.contains(key)) return fallback;
    mark(key);
    const json& v = j_.at(key);
    if (!v.is_string())
      die(RG_ERR_INVALID, "config: '" + loc(key) + "' must be a string");
    return v.get<std::string>();
  }

  std::vector<double> num_list(const char* key) {
    if (!j_.contains(key))
      die(RG_ERR_INVALID, "config: '" + loc(key) + "' is required");
    return num_list(key, {});
  }

  std::vector<double> num_list(const char* key, std::vector<double> fallback) {
    if (!j_.contains(key)) return fallback;
    mark(key);
    const json& v = j_.at(key);
    if (!v.is_array())
      die(RG_ERR_INVALID,
          "config: '" + loc(key) + "' must be an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number())
        die(RG_ERR_INVALID, "config: '" + loc(key) + "[" +
                                std::to_string(i) + "]' must be a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  std::vector<std::int64_t> int_list(const char* key,
                                     std::vector<std::int64_t> fallback) {
    if (!j_.contains(key)) return fallback;
    mark(key);
    const json& v = j_.at(key);
    if (!v.is_array())
      die(RG_ERR_INVALID,
          "config: '" + loc(key) + "' must be an array of integers");
    std::vector<std::int64_t> out;
    out.reserve(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer())
        die(RG_ERR_INVALID, "config: '" + loc(key) + "[" +
                                std::to_string(i) + "]' must be an integer");
      out.push_back(v[i].get<std::int64_t>());
    }
    return out;
  }

  // Child object; missing key yields an empty object (defaults apply).
  Section sub(const char* key) {
    if (!j_.contains(key)) return Section(empty_, loc(key));
    mark(key);
    return Section(j_.at(key), loc(key));
  }

  void done() const {
    for (const auto& item : j_.items())
      if (!used_.count(item.key()))
        die(RG_ERR_INVALID, "config: unknown key '" + loc(item.key()) + "'");
  }

 private:
  std::string loc(const std::string& key) const {
    if (path_.empty()) return key;
    return key.empty() ? path_ : path_ + "." + key;
  }
  void mark(const char* key) { used_.insert(key); }

  static const json empty_;
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

const json Section::empty_ = json::object();

/* ---- formatting / artifact writing ---------------------------------------- */

// Shortest decimal string that scans back to exactly the same double.
std::string fmt_g(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    double back = 0.0;
    if (std::sscanf(buf, "%lf", &back) == 1 && back == v) break;
  }
  return buf;
}

void write_artifact(const fs::path& dir, const std::string& name,
                    const std::string& content) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path tmp = dir / (name + ".tmp");
  const fs::path dst = dir / name;
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) die(RG_ERR_IO, "cannot open for writing: " + tmp.string());
    out << content;
    out.flush();
    if (!out) die(RG_ERR_IO, "write failed: " + tmp.string());
  }
  fs::rename(tmp, dst, ec);
  if (ec)
    die(RG_ERR_IO, "rename failed: " + dst.string() + ": " + ec.message());
}

void write_json(const fs::path& dir, const std::string& name, const json& j) {
  write_artifact(dir, name, j.dump(2) + "\n");
}

/* ---- common options -------------------------------------------------------- */

struct Common {
  std::string config_path;
  std::string out = ".";
  int threads = 1;
  std::uint64_t seed = 1234;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "JSON configuration file");
  sub->add_option("--out", c.out, "output directory (default: .)");
  sub->add_option("--threads", c.threads, "worker thread cap");
  sub->add_option("--seed", c.seed, "random seed (decimal uint64)");
}

// Defaults < config < explicit flags, for the common quartet.
void resolve_common(CLI::App* sub, Section& root, Common& c) {
  std::int64_t cfg_threads = root.integer("threads", c.threads);
  bool cfg_seed_present = root.has("seed");
  std::int64_t cfg_seed = root.integer("seed", (std::int64_t)c.seed);
  if (!sub->count("--threads")) c.threads = (int)cfg_threads;
  if (!sub->count("--seed") && cfg_seed_present) {
    if (cfg_seed < 0) die(RG_ERR_INVALID, "config: 'seed' must be >= 0");
    c.seed = (std::uint64_t)cfg_seed;
  }
  if (c.threads < 0) die(RG_ERR_INVALID, "config: thread count must be >= 0");
}

/* ---- trap ------------------------------------------------------------------- */

struct TrapCfg {
  double radial_coeff = 1.0;
  double s = 2.0;
  double axial_coeff = 1.0;
  double p = 2.0;
  double offset = 0.0;

  json echo() const {
    return json{{"radial_coeff", radial_coeff},
                {"s", s},
                {"axial_coeff", axial_coeff},
                {"p", p},
                {"offset", offset}};
  }

  TrapPtr create() const {
    rg_trap* t = nullptr;
    check(rg_trap_create(radial_coeff, s, axial_coeff, p, offset, &t));
    return TrapPtr(t);
  }
};

TrapCfg read_trap(Section& root) {
  Section t = root.sub("trap");
  TrapCfg cfg;
  cfg.radial_coeff = t.num("radial_coeff", cfg.radial_coeff);
  cfg.s = t.num("s", cfg.s);
  cfg.axial_coeff = t.num("axial_coeff", cfg.axial_coeff);
  cfg.p = t.num("p", cfg.p);
  cfg.offset = t.num("offset", cfg.offset);
  t.done();
  return cfg;
}

void require_subcritical(const rg_trap* trap, double omega) {
  double crit = 0.0;
  check(rg_trap_critical_omega(trap, &crit));
  if (!(std::abs(omega) < crit))
    die(RG_ERR_INVALID,
        "config: |omega| = " + fmt_g(std::abs(omega)) +
            " must stay below the critical rotation speed " + fmt_g(crit) +
            " of this trap");
}

struct Grid2Cfg {
  std::int64_t nr = 192, nz = 192;
  double r_max = 8.0, z_max = 8.0;

  json echo() const {
    return json{
        {"nr", nr}, {"nz", nz}, {"r_max", r_max}, {"z_max", z_max}};
  }

  Grid2Ptr create() const {
    rg_grid2* g = nullptr;
    check(rg_grid2_create((int32_t)nr, (int32_t)nz, r_max, z_max, &g));
    return Grid2Ptr(g);
  }
};

Grid2Cfg read_grid2(Section& root) {
  Section g = root.sub("grid");
  Grid2Cfg cfg;
  cfg.nr = g.integer("nr", cfg.nr);
  cfg.nz = g.integer("nz", cfg.nz);
  cfg.r_max = g.num("r_max", cfg.r_max);
  cfg.z_max = g.num("z_max", cfg.z_max);
  g.done();
  return cfg;
}

json make_meta(const char* command, const Common& c, json resolved) {
  json m;
  m["tool"] = rg_version();
  m["command"] = command;
  m["rng"] = rg_rng_contract();
  m["seed"] = c.seed;
  m["threads"] = c.threads;
  m["config"] = std::move(resolved);
  return m;
}

std::string csv_preamble(const json& meta) {
  json compact;
  compact["tool"] = meta.at("tool");
  compact["command"] = meta.at("command");
  compact["seed"] = meta.at("seed");
  compact["config"] = meta.at("config");
  return "# " + compact.dump() + "\n";
}

// Matrix field as CSV rows (one grid row per line).
std::string matrix_csv(const json& meta, const double* data, int nrows,
                       int ncols) {
  std::string out = csv_preamble(meta);
  out.reserve(out.size() + (size_t)nrows * ncols * 12);
  for (int i = 0; i < nrows; ++i) {
    for (int j = 0; j < ncols; ++j) {
      if (j) out += ',';
      out += fmt_g(data[(size_t)i * ncols + j]);
    }
    out += '\n';
  }
  return out;
}

/* ---- channel ---------------------------------------------------------------- */

struct ChannelFlags {
  double coupling = 0.0, omega = 0.0;
  std::int64_t n_max = 5;
  std::int64_t nr = 192, nz = 192;
  double r_max = 8.0, z_max = 8.0;
  double tol = 0.0;
  std::int64_t max_iter = 0;
  double trap_radial = 1.0, trap_s = 2.0, trap_axial = 1.0, trap_p = 2.0,
         trap_offset = 0.0;
  bool write_orbitals = false;
};

int run_channel(CLI::App* sub, Common& c, ChannelFlags& f) {
  json cfg = c.config_path.empty() ? json::object()
                                   : load_config_file(c.config_path);
  Section root(cfg, "");
  resolve_common(sub, root, c);

  TrapCfg trap_cfg = read_trap(root);
  if (sub->count("--trap-radial")) trap_cfg.radial_coeff = f.trap_radial;
  if (sub->count("--trap-s")) trap_cfg.s = f.trap_s;
  if (sub->count("--trap-axial")) trap_cfg.axial_coeff = f.trap_axial;
  if (sub->count("--trap-p")) trap_cfg.p = f.trap_p;
  if (sub->count("--trap-offset")) trap_cfg.offset = f.trap_offset;

  Grid2Cfg grid_cfg = read_grid2(root);
  if (sub->count("--nr")) grid_cfg.nr = f.nr;
  if (sub->count("--nz")) grid_cfg.nz = f.nz;
  if (sub->count("--r-max")) grid_cfg.r_max = f.r_max;
  if (sub->count("--z-max")) grid_cfg.z_max = f.z_max;

  double coupling = root.num("coupling", f.coupling);
  double omega = root.num("omega", f.omega);
  std::int64_t n_max = root.integer("n_max", f.n_max);
  rg_channel_opts opts;
  rg_channel_opts_default(&opts);
  opts.tol = root.num("tol", opts.tol);
  opts.max_iter = root.integer("max_iter", opts.max_iter);
  bool write_orbitals = root.boolean("write_orbitals", f.write_orbitals);
  root.done();

  if (sub->count("--coupling")) coupling = f.coupling;
  if (sub->count("--omega")) omega = f.omega;
  if (sub->count("--n-max")) n_max = f.n_max;
  if (sub->count("--tol")) opts.tol = f.tol;
  if (sub->count("--max-iter")) opts.max_iter = f.max_iter;
  if (sub->count("--write-orbitals")) write_orbitals = f.write_orbitals;

  TrapPtr trap = trap_cfg.create();
  require_subcritical(trap.get(), omega);
  Grid2Ptr grid = grid_cfg.create();

  rg_channel_scan* scan_raw = nullptr;
  check(rg_channel_scan_run(grid.get(), trap.get(), coupling,
                            (int32_t)n_max, omega, &opts, &scan_raw));
  ChanScanPtr scan(scan_raw);

  json resolved;
  resolved["trap"] = trap_cfg.echo();
  resolved["grid"] = grid_cfg.echo();
  resolved["coupling"] = coupling;
  resolved["omega"] = omega;
  resolved["n_max"] = n_max;
  resolved["tol"] = opts.tol;
  resolved["max_iter"] = opts.max_iter;
  resolved["write_orbitals"] = write_orbitals;
  json meta = make_meta("channel", c, resolved);

  int32_t count = 0;
  check(rg_channel_scan_size(scan.get(), &count));
  bool all_converged = true;

  std::string csv = csv_preamble(meta);
  csv += "n,energy,mu_tilde,residual,iterations,converged,quartic\n";
  json rows = json::array();
  for (int32_t i = 0; i < count; ++i) {
    rg_channel_stats st;
    check(rg_channel_scan_stats(scan.get(), i, &st));
    all_converged = all_converged && st.converged;
    csv += std::to_string(st.n) + "," + fmt_g(st.energy) + "," +
           fmt_g(st.mu_tilde) + "," + fmt_g(st.residual) + "," +
           std::to_string(st.iterations) + "," +
           std::to_string(st.converged) + "," + fmt_g(st.quartic) + "\n";
    rows.push_back(json{{"n", st.n},
                        {"energy", st.energy},
                        {"mu_tilde", st.mu_tilde},
                        {"residual", st.residual},
                        {"quartic", st.quartic},
                        {"iterations", st.iterations},
                        {"converged", st.converged != 0}});
  }

  int32_t best_n = 0, bracketed = 0;
  double best_value = 0.0;
  check(rg_channel_scan_best(scan.get(), omega, &best_n, &best_value,
                             &bracketed));

  json out;
  out["meta"] = meta;
  out["rows"] = rows;
  out["best_symmetric"] = json{{"n", best_n},
                               {"value", best_value},
                               {"bracketed", bracketed != 0}};
  write_json(c.out, "channel_scan.json", out);
  write_artifact(c.out, "channel_scan.csv", csv);

  if (write_orbitals) {
    for (int32_t i = 0; i < count; ++i) {
      rg_channel_stats st;
      check(rg_channel_scan_stats(scan.get(), i, &st));
      const double* data = nullptr;
      int32_t nr = 0, nz = 0;
      check(rg_channel_scan_orbital(scan.get(), i, &data, &nr, &nz));
      char name[64];
      std::snprintf(name, sizeof name, "orbital_%03d.csv", st.n);
      write_artifact(c.out, name, matrix_csv(meta, data, nr, nz));
    }
  }

  if (!all_converged)
    die(RG_ERR_CONVERGENCE,
        "channel scan: at least one channel missed the residual target "
        "(see channel_scan.csv)");
  return 0;
}

/* ---- dm ----------------------------------------------------------------------- */

int run_dm(CLI::App* sub, Common& c, ChannelFlags& f) {
  json cfg = c.config_path.empty() ? json::object()
                                   : load_config_file(c.config_path);
  Section root(cfg, "");
  resolve_common(sub, root, c);
  TrapCfg trap_cfg = read_trap(root);
  Grid2Cfg grid_cfg = read_grid2(root);

  double coupling = root.num("coupling", f.coupling);
  double omega = root.num("omega", f.omega);
  rg_dm_opts opts;
  rg_dm_opts_default(&opts);
  opts.gap_tol_rel = root.num("gap_tol_rel", opts.gap_tol_rel);
  opts.max_iter = root.integer("max_iter", opts.max_iter);
  opts.n_hi = (int32_t)root.integer("n_hi", opts.n_hi);
  opts.occ_drop = root.num("occ_drop", opts.occ_drop);
  bool write_density = root.boolean("write_density", false);
  root.done();
  if (sub->count("--coupling")) coupling = f.coupling;
  if (sub->count("--omega")) omega = f.omega;

  TrapPtr trap = trap_cfg.create();
  require_subcritical(trap.get(), omega);
  Grid2Ptr grid = grid_cfg.create();

  json resolved;
  resolved["trap"] = trap_cfg.echo();
  resolved["grid"] = grid_cfg.echo();
  resolved["omega"] = omega;
  resolved["coupling"] = coupling;
  resolved["gap_tol_rel"] = opts.gap_tol_rel;
  resolved["max_iter"] = opts.max_iter;
  resolved["n_hi"] = opts.n_hi;
  resolved["occ_drop"] = opts.occ_drop;
  resolved["write_density"] = write_density;
  json meta = make_meta("dm", c, resolved);

  json out;
  out["meta"] = meta;
  out["omega"] = omega;
  out["g"] = coupling;

  int32_t nr = 0, nz = 0;
  std::vector<double> density;
  bool converged = false;

  if (coupling == 0.0) {
    // Pure eigenproblem: without interaction the minimizer is the rank-one
    // projector onto the best channel eigenstate, so delegate to the scan.
    rg_channel_opts copts;
    rg_channel_opts_default(&copts);
    rg_channel_scan* scan_raw = nullptr;
    check(rg_channel_scan_run(grid.get(), trap.get(), 0.0, -1, omega, &copts,
                              &scan_raw));
    ChanScanPtr scan(scan_raw);
    int32_t best_n = 0, bracketed = 0;
    double best_value = 0.0;
    check(rg_channel_scan_best(scan.get(), omega, &best_n, &best_value,
                               &bracketed));
    rg_channel_stats st;
    check(rg_channel_scan_stats(scan.get(), best_n, &st));
    converged = st.converged != 0 && bracketed != 0;

    out["energy"] = best_value;
    out["gap"] = 0.0;
    out["rank"] = 1;
    out["occupations"] = json::array({json{{"n", best_n}, {"lambda", 1.0}}});
    out["iterations"] = st.iterations;
    out["converged"] = converged;
    out["lz_mean"] = (double)best_n;
    out["lz_variance"] = 0.0;
    out["bracketed"] = bracketed != 0;

    if (write_density) {
      const double* f0 = nullptr;
      check(rg_channel_scan_orbital(scan.get(), best_n, &f0, &nr, &nz));
      density.assign((size_t)nr * nz, 0.0);
      for (size_t k = 0; k < density.size(); ++k) density[k] = f0[k] * f0[k];
    }
  } else {
    rg_dm_result* dm_raw = nullptr;
    check(rg_dm_solve(grid.get(), trap.get(), omega, coupling, &opts,
                      &dm_raw));
    DmPtr dm(dm_raw);
    rg_dm_stats st;
    check(rg_dm_result_stats(dm.get(), &st));
    converged = st.converged != 0;

    json occs = json::array();
    for (int32_t i = 0; i < st.n_channels; ++i) {
      int32_t n = 0;
      double lambda = 0.0;
      check(rg_dm_result_channel(dm.get(), i, &n, &lambda));
      occs.push_back(json{{"n", n}, {"lambda", lambda}});
    }
    out["energy"] = st.energy;
    out["gap"] = st.gap;
    out["rank"] = st.rank;
    out["occupations"] = occs;
    out["iterations"] = st.iterations;
    out["converged"] = converged;
    out["lz_mean"] = st.lz_mean;
    out["lz_variance"] = st.lz_variance;

    const double* he = nullptr;
    const double* hg = nullptr;
    int32_t hist = 0;
    check(rg_dm_result_history(dm.get(), &he, &hg, &hist));
    std::string hcsv = csv_preamble(meta);
    hcsv += "iteration,energy,gap\n";
    for (int32_t i = 0; i < hist; ++i)
      hcsv += std::to_string(i) + "," + fmt_g(he[i]) + "," + fmt_g(hg[i]) +
              "\n";
    write_artifact(c.out, "dm_history.csv", hcsv);

    if (write_density) {
      for (int32_t i = 0; i < st.n_channels; ++i) {
        int32_t n = 0;
        double lambda = 0.0;
        check(rg_dm_result_channel(dm.get(), i, &n, &lambda));
        const double* fj = nullptr;
        check(rg_dm_result_orbital(dm.get(), i, &fj, &nr, &nz));
        if (density.empty()) density.assign((size_t)nr * nz, 0.0);
        for (size_t k = 0; k < density.size(); ++k)
          density[k] += lambda * fj[k] * fj[k];
      }
    }
  }

  write_json(c.out, "dm_result.json", out);
  if (write_density && !density.empty())
    write_artifact(c.out, "dm_density.csv",
                   matrix_csv(meta, density.data(), nr, nz));

  if (!converged)
    die(RG_ERR_CONVERGENCE,
        "dm: duality-gap target not certified (see dm_result.json)");
  return 0;
}

/* ---- gp3d ----------------------------------------------------------------------- */

int run_gp3d(CLI::App* sub, Common& c, ChannelFlags& f) {
  json cfg = c.config_path.empty() ? json::object()
                                   : load_config_file(c.config_path);
  Section root(cfg, "");
  resolve_common(sub, root, c);
  TrapCfg trap_cfg = read_trap(root);

  Section gsec = root.sub("grid");
  std::int64_t n = gsec.integer("n", 96);
  double half_extent = gsec.num("half_extent", 8.0);
  gsec.done();

  double coupling = root.num("coupling", f.coupling);
  double omega = root.num("omega", f.omega);
  rg_gp3_opts opts;
  rg_gp3_opts_default(&opts);
  opts.tol = root.num("tol", opts.tol);
  opts.max_iter = root.integer("max_iter", opts.max_iter);
  opts.stencil_order = (int32_t)root.integer("stencil_order",
                                             opts.stencil_order);
  opts.multistart = (int32_t)root.integer("multistart", opts.multistart);
  opts.cascade = root.boolean("cascade", opts.cascade != 0) ? 1 : 0;
  bool write_slices = root.boolean("write_slices", true);
  root.done();
  if (sub->count("--coupling")) coupling = f.coupling;
  if (sub->count("--omega")) omega = f.omega;
  opts.threads = c.threads;

  TrapPtr trap = trap_cfg.create();
  require_subcritical(trap.get(), omega);
  rg_grid3* g3_raw = nullptr;
  check(rg_grid3_create((int32_t)n, half_extent, &g3_raw));
  Grid3Ptr g3(g3_raw);

  json resolved;
  resolved["trap"] = trap_cfg.echo();
  resolved["grid"] = json{{"n", n}, {"half_extent", half_extent}};
  resolved["omega"] = omega;
  resolved["coupling"] = coupling;
  resolved["tol"] = opts.tol;
  resolved["max_iter"] = opts.max_iter;
  resolved["stencil_order"] = opts.stencil_order;
  resolved["multistart"] = opts.multistart;
  resolved["cascade"] = opts.cascade != 0;
  resolved["write_slices"] = write_slices;
  json meta = make_meta("gp3d", c, resolved);

  rg_gp_result* gp_raw = nullptr;
  check(rg_gp3_solve(g3.get(), trap.get(), omega, coupling, c.seed, &opts,
                     &gp_raw));
  GpPtr gp(gp_raw);

  rg_gp_stats st;
  check(rg_gp_result_stats(gp.get(), &st));
  const char* label = nullptr;
  check(rg_gp_result_init_label(gp.get(), &label));

  const double* vx = nullptr;
  const double* vy = nullptr;
  const int32_t* vw = nullptr;
  int32_t vcount = 0, vskipped = 0;
  check(rg_gp_result_vortices(gp.get(), &vx, &vy, &vw, &vcount, &vskipped));

  json vortices = json::array();
  std::string vcsv = csv_preamble(meta);
  vcsv += "x,y,winding\n";
  for (int32_t i = 0; i < vcount; ++i) {
    vortices.push_back(json{{"x", vx[i]}, {"y", vy[i]}, {"winding", vw[i]}});
    vcsv += fmt_g(vx[i]) + "," + fmt_g(vy[i]) + "," + std::to_string(vw[i]) +
            "\n";
  }

  json out;
  out["meta"] = meta;
  out["omega"] = omega;
  out["g"] = coupling;
  out["energy"] = st.energy;
  out["mu"] = st.mu;
  out["residual"] = st.residual;
  out["quartic"] = st.quartic;
  out["lz_mean"] = st.lz_mean;
  out["lz_variance"] = st.lz_variance;
  out["iterations"] = st.iterations;
  out["converged"] = st.converged != 0;
  out["init_label"] = label;
  out["vortices"] = vortices;
  out["skipped_plaquettes"] = vskipped;
  write_json(c.out, "gp3d_result.json", out);
  write_artifact(c.out, "gp3d_vortices.csv", vcsv);

  if (write_slices) {
    const double* density = nullptr;
    const double* phase = nullptr;
    int32_t nx = 0, ny = 0;
    check(rg_gp_result_slice(gp.get(), &density, &phase, &nx, &ny));
    write_artifact(c.out, "gp3d_density.csv",
                   matrix_csv(meta, density, nx, ny));
    write_artifact(c.out, "gp3d_phase.csv", matrix_csv(meta, phase, nx, ny));
  }

  if (!st.converged)
    die(RG_ERR_CONVERGENCE, "gp3d: residual target not met");
  return 0;
}

/* ---- stability ----------------------------------------------------------------- */

int run_stability(CLI::App* sub, Common& c, ChannelFlags& f) {
  json cfg = c.config_path.empty() ? json::object()
                                   : load_config_file(c.config_path);
  Section root(cfg, "");
  resolve_common(sub, root, c);
  TrapCfg trap_cfg = read_trap(root);
  Grid2Cfg grid_cfg = read_grid2(root);

  double coupling = root.num("coupling", f.coupling);
  double omega = root.num("omega", f.omega);
  std::vector<std::int64_t> n_list = root.int_list(
      "n_list", {1, 2, 4, 8, 16, 32, 64, 128, 256, 512});
  std::vector<double> L_grid = root.num_list(
      "L_grid", {0.25, 0.35, 0.5, 0.7, 1.0, 1.4, 2.0, 2.8, 4.0});
  rg_channel_opts opts;
  rg_channel_opts_default(&opts);
  opts.tol = root.num("tol", opts.tol);
  opts.max_iter = root.integer("max_iter", opts.max_iter);
  root.done();
  if (sub->count("--coupling")) coupling = f.coupling;
  if (sub->count("--omega")) omega = f.omega;

  TrapPtr trap = trap_cfg.create();
  require_subcritical(trap.get(), omega);
  Grid2Ptr grid = grid_cfg.create();

  std::vector<int32_t> ns(n_list.begin(), n_list.end());
  rg_stability_report* rep_raw = nullptr;
  check(rg_stability_scan(grid.get(), trap.get(), omega, coupling, ns.data(),
                          (int32_t)ns.size(), L_grid.data(),
                          (int32_t)L_grid.size(), &opts, &rep_raw));
  StabPtr rep(rep_raw);

  json resolved;
  resolved["trap"] = trap_cfg.echo();
  resolved["grid"] = grid_cfg.echo();
  resolved["omega"] = omega;
  resolved["coupling"] = coupling;
  resolved["n_list"] = n_list;
  resolved["L_grid"] = L_grid;
  resolved["tol"] = opts.tol;
  resolved["max_iter"] = opts.max_iter;
  json meta = make_meta("stability", c, resolved);

  int32_t count = 0;
  check(rg_stability_report_size(rep.get(), &count));

  json rows = json::array();
  std::string csv = csv_preamble(meta);
  csv += "n,e_channel,mu_tilde,c_n,L_best,q_min,unstable,a1_ratio,a3_ratio,"
         "axial_decay_ok\n";
  for (int32_t i = 0; i < count; ++i) {
    rg_stability_row r;
    check(rg_stability_report_row(rep.get(), i, &r));
    const double* qs = nullptr;
    int32_t qn = 0;
    check(rg_stability_report_q_values(rep.get(), i, &qs, &qn));
    json q_by_L = json::array();
    for (int32_t k = 0; k < qn; ++k)
      q_by_L.push_back(json{{"L", L_grid[(size_t)k]}, {"q", qs[k]}});
    rows.push_back(json{{"n", r.n},
                        {"e_channel", r.e_channel},
                        {"mu_tilde", r.mu_tilde},
                        {"c_n", r.c_n},
                        {"q_by_L", q_by_L},
                        {"L_best", r.L_best},
                        {"q_min", r.q_min},
                        {"unstable", r.unstable != 0},
                        {"a1_ratio", r.a1_ratio},
                        {"a1_ratio_unsq", r.a1_ratio_unsq},
                        {"a3_ratio", r.a3_ratio},
                        {"axial_decay_ok", r.axial_decay_ok != 0}});
    csv += std::to_string(r.n) + "," + fmt_g(r.e_channel) + "," +
           fmt_g(r.mu_tilde) + "," + fmt_g(r.c_n) + "," + fmt_g(r.L_best) +
           "," + fmt_g(r.q_min) + "," + std::to_string(r.unstable) + "," +
           fmt_g(r.a1_ratio) + "," + fmt_g(r.a3_ratio) + "," +
           std::to_string(r.axial_decay_ok) + "\n";
  }

  int32_t any = 0, first_n = -1, n_max_tested = 0;
  check(rg_stability_report_summary(rep.get(), &any, &first_n,
                                    &n_max_tested));
  json out;
  out["meta"] = meta;
  out["omega"] = omega;
  out["g"] = coupling;
  out["rows"] = rows;
  out["summary"] = json{{"any_unstable", any != 0},
                        {"first_unstable_n", first_n},
                        {"n_max_tested", n_max_tested}};
  write_json(c.out, "stability.json", out);
  write_artifact(c.out, "stability.csv", csv);
  return 0;
}

/* ---- phase ----------------------------------------------------------------------- */

int run_phase(CLI::App* sub, Common& c) {
  json cfg = c.config_path.empty() ? json::object()
                                   : load_config_file(c.config_path);
  Section root(cfg, "");
  resolve_common(sub, root, c);
  TrapCfg trap_cfg = read_trap(root);

  std::vector<double> omegas = root.num_list("omega_list");
  std::vector<double> gs = root.num_list("g_list");
  rg_phase_opts opts;
  rg_phase_opts_default(&opts);
  opts.tol_abs = root.num("tol_abs", opts.tol_abs);
  opts.tol_rel = root.num("tol_rel", opts.tol_rel);
  opts.refine = (int32_t)root.integer("refine", opts.refine);
  opts.fast = root.boolean("fast", opts.fast != 0) ? 1 : 0;
  opts.with_3d = root.boolean("with_3d", opts.with_3d != 0) ? 1 : 0;
  bool with_gap_decay = root.boolean("gap_decay", false);
  root.done();
  opts.threads = c.threads;

  TrapPtr trap = trap_cfg.create();
  for (double w : omegas) require_subcritical(trap.get(), w);

  json resolved;
  resolved["trap"] = trap_cfg.echo();
  resolved["omega_list"] = omegas;
  resolved["g_list"] = gs;
  resolved["tol_abs"] = opts.tol_abs;
  resolved["tol_rel"] = opts.tol_rel;
  resolved["refine"] = opts.refine;
  resolved["fast"] = opts.fast != 0;
  resolved["with_3d"] = opts.with_3d != 0;
  resolved["gap_decay"] = with_gap_decay;
  json meta = make_meta("phase", c, resolved);

  rg_phase_scan* scan_raw = nullptr;
  check(rg_phase_scan_run(trap.get(), omegas.data(), (int32_t)omegas.size(),
                          gs.data(), (int32_t)gs.size(), c.seed, &opts,
                          &scan_raw));
  PhasePtr scan(scan_raw);

  int32_t count = 0;
  check(rg_phase_scan_size(scan.get(), &count));
  std::string csv = csv_preamble(meta);
  csv += "omega,g,e_gp_3d,e_gp_channel,e_dm,margin,dm_gap,lz_variance,"
         "dm_rank,in_xi,gp_converged,dm_converged,channel_bracketed,n_star\n";
  for (int32_t i = 0; i < count; ++i) {
    rg_phase_point p;
    check(rg_phase_scan_point(scan.get(), i, &p));
    csv += fmt_g(p.omega) + "," + fmt_g(p.g) + "," + fmt_g(p.e_gp_3d) + "," +
           fmt_g(p.e_gp_channel) + "," + fmt_g(p.e_dm) + "," +
           fmt_g(p.margin) + "," + fmt_g(p.dm_gap) + "," +
           fmt_g(p.lz_variance) + "," + std::to_string(p.dm_rank) + "," +
           std::to_string(p.in_xi) + "," + std::to_string(p.gp_converged) +
           "," + std::to_string(p.dm_converged) + "," +
           std::to_string(p.channel_bracketed) + "," +
           std::to_string(p.n_star) + "\n";
  }
  write_artifact(c.out, "phase_scan.csv", csv);

  json sidecar;
  sidecar["meta"] = meta;
  sidecar["points"] = count;
  rg_phase_point best;
  int32_t found = 0;
  check(rg_phase_locate_broken(scan.get(), &best, &found));
  if (found) {
    sidecar["symmetry_broken_point"] =
        json{{"omega", best.omega},       {"g", best.g},
             {"margin", best.margin},     {"dm_rank", best.dm_rank},
             {"lz_variance", best.lz_variance}, {"e_dm", best.e_dm},
             {"e_gp_3d", best.e_gp_3d},   {"e_gp_channel", best.e_gp_channel}};
  } else {
    sidecar["symmetry_broken_point"] = nullptr;
  }

  if (with_gap_decay) {
    rg_gap_decay* gd_raw = nullptr;
    check(rg_gap_decay_run(trap.get(), gs.data(), (int32_t)gs.size(), &opts,
                           &gd_raw));
    GapPtr gd(gd_raw);
    int32_t rows = 0;
    check(rg_gap_decay_size(gd.get(), &rows));
    json table = json::array();
    std::string gcsv = csv_preamble(meta);
    gcsv += "g,gap0,gap1,gap2\n";
    for (int32_t i = 0; i < rows; ++i) {
      double g = 0, g0 = 0, g1 = 0, g2 = 0;
      check(rg_gap_decay_row(gd.get(), i, &g, &g0, &g1, &g2));
      table.push_back(
          json{{"g", g}, {"gap0", g0}, {"gap1", g1}, {"gap2", g2}});
      gcsv += fmt_g(g) + "," + fmt_g(g0) + "," + fmt_g(g1) + "," + fmt_g(g2) +
              "\n";
    }
    double expn = 0.0;
    int32_t noninc = 0;
    check(rg_gap_decay_summary(gd.get(), &expn, &noninc));
    sidecar["gap_decay"] = json{{"rows", table},
                                {"predicted_exponent", expn},
                                {"nonincreasing", noninc != 0}};
    write_artifact(c.out, "gap_decay.csv", gcsv);
  }

  write_json(c.out, "phase_meta.json", sidecar);
  return 0;
}

/* ---- toy ------------------------------------------------------------------------- */

int run_toy(CLI::App* sub, Common& c, ChannelFlags& f) {
  json cfg = c.config_path.empty() ? json::object()
                                   : load_config_file(c.config_path);
  Section root(cfg, "");
  resolve_common(sub, root, c);

  std::int64_t n_particles = root.integer("n_particles", 2);
  std::int64_t n_modes = root.integer("n_modes", 3);
  double omega = root.num("omega", f.omega);
  double coupling = root.num("coupling", f.coupling);
  std::string solver = root.str("solver", "auto");
  root.done();
  if (sub->count("--omega")) omega = f.omega;
  if (sub->count("--coupling")) coupling = f.coupling;

  int32_t kind;
  if (solver == "auto") kind = RG_TOY_AUTO;
  else if (solver == "dense") kind = RG_TOY_DENSE;
  else if (solver == "lanczos") kind = RG_TOY_LANCZOS;
  else
    die(RG_ERR_INVALID,
        "config: 'solver' must be one of auto, dense, lanczos");

  json resolved;
  resolved["n_particles"] = n_particles;
  resolved["n_modes"] = n_modes;
  resolved["omega"] = omega;
  resolved["coupling"] = coupling;
  resolved["solver"] = solver;
  json meta = make_meta("toy", c, resolved);

  rg_toy_result* toy_raw = nullptr;
  check(rg_toy_solve((int32_t)n_particles, (int32_t)n_modes, omega, coupling,
                     kind, &toy_raw));
  ToyPtr toy(toy_raw);

  rg_toy_stats st;
  check(rg_toy_result_stats(toy.get(), &st));
  const double* eigs = nullptr;
  int32_t eig_count = 0;
  check(rg_toy_result_rdm(toy.get(), &eigs, &eig_count));

  json out;
  out["meta"] = meta;
  out["N"] = n_particles;
  out["M"] = n_modes;
  out["omega"] = omega;
  out["coupling"] = coupling;
  out["e_bose"] = st.e_bose;
  out["e_abs"] = st.e_abs;
  out["gap"] = st.gap;
  out["rdm_eigenvalues"] = std::vector<double>(eigs, eigs + eig_count);
  out["sector_label"] =
      st.ground_symmetric ? "symmetric" : "non-symmetric";
  out["total_m_bose"] = st.total_m_bose;
  out["total_m_abs"] = st.total_m_abs;
  out["condensate_fraction"] = st.condensate_fraction;
  out["rdm_trace"] = st.rdm_trace;
  out["dim_bose"] = st.dim_bose;
  out["dim_abs"] = st.dim_abs;
  out["dense_mismatch"] = st.dense_mismatch;
  write_json(c.out, "toy_result.json", out);

  std::string csv = csv_preamble(meta);
  csv += "index,eigenvalue\n";
  for (int32_t i = 0; i < eig_count; ++i)
    csv += std::to_string(i) + "," + fmt_g(eigs[i]) + "\n";
  write_artifact(c.out, "toy_rdm.csv", csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // The banded eigenproblems are small; multithreaded BLAS only adds
  // scheduling noise. Explicit parallelism goes through --threads.
  setenv("OPENBLAS_NUM_THREADS", "1", 0);

  CLI::App app{"rotgas: mean-field solvers for a rotating trapped Bose gas"};
  app.require_subcommand(1);
  app.set_version_flag("--version", rg_version());

  Common common;
  ChannelFlags flags;

  auto* ch = app.add_subcommand(
      "channel", "minimize the angular-momentum channel functionals");
  add_common(ch, common);
  ch->add_option("--coupling", flags.coupling, "interaction strength g >= 0");
  ch->add_option("--omega", flags.omega, "rotation speed");
  ch->add_option("--n-max", flags.n_max, "scan n = 0..n_max (-1 adaptive)");
  ch->add_option("--nr", flags.nr, "radial cells");
  ch->add_option("--nz", flags.nz, "axial cells");
  ch->add_option("--r-max", flags.r_max, "radial extent");
  ch->add_option("--z-max", flags.z_max, "axial half-extent");
  ch->add_option("--tol", flags.tol, "relative residual target");
  ch->add_option("--max-iter", flags.max_iter, "iteration cap");
  ch->add_option("--trap-radial", flags.trap_radial, "radial coefficient");
  ch->add_option("--trap-s", flags.trap_s, "radial power s >= 2");
  ch->add_option("--trap-axial", flags.trap_axial, "axial coefficient");
  ch->add_option("--trap-p", flags.trap_p, "axial power p >= 2");
  ch->add_option("--trap-offset", flags.trap_offset, "potential offset");
  ch->add_flag("--write-orbitals", flags.write_orbitals,
               "dump each orbital as CSV");

  auto* dm = app.add_subcommand(
      "dm", "minimize the density-matrix functional (Frank-Wolfe)");
  add_common(dm, common);
  dm->add_option("--coupling", flags.coupling, "interaction strength g >= 0");
  dm->add_option("--omega", flags.omega, "rotation speed");

  auto* gp = app.add_subcommand(
      "gp3d", "minimize the full 3D Gross-Pitaevskii functional");
  add_common(gp, common);
  gp->add_option("--coupling", flags.coupling, "interaction strength g >= 0");
  gp->add_option("--omega", flags.omega, "rotation speed");

  auto* stab = app.add_subcommand(
      "stability", "trial-function instability certificates Q(w)");
  add_common(stab, common);
  stab->add_option("--coupling", flags.coupling,
                   "interaction strength g >= 0");
  stab->add_option("--omega", flags.omega, "rotation speed");

  auto* ph = app.add_subcommand(
      "phase", "scan the (omega, g) plane for symmetry breaking");
  add_common(ph, common);

  auto* toy = app.add_subcommand(
      "toy", "exact diagonalization of the truncated many-body model");
  add_common(toy, common);
  toy->add_option("--coupling", flags.coupling, "contact coupling");
  toy->add_option("--omega", flags.omega, "rotation speed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return RG_ERR_INVALID;
  }

  try {
    if (ch->parsed()) return run_channel(ch, common, flags);
    if (dm->parsed()) return run_dm(dm, common, flags);
    if (gp->parsed()) return run_gp3d(gp, common, flags);
    if (stab->parsed()) return run_stability(stab, common, flags);
    if (ph->parsed()) return run_phase(ph, common);
    if (toy->parsed()) return run_toy(toy, common, flags);
    return RG_ERR_INVALID;
  } catch (const CliError& e) {
    json err;
    err["error"] = json{{"code", e.code}, {"message", e.message}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return e.code;
  } catch (const std::exception& e) {
    json err;
    err["error"] = json{{"code", RG_ERR_INTERNAL}, {"message", e.what()}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return RG_ERR_INTERNAL;
  }
}
