// C interface of the solver library. Every entry point catches exceptions
// from the core and converts them to status codes; the message of the most
// recent failure is kept per thread for rg_error_message(). Accessors hand
// out views into the owning handle, so no caller-side freeing beyond the
// rg_*_destroy calls is ever needed.

#include "rotgas.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <new>
#include <string>
#include <utility>
#include <vector>

#include "../core/channel.hpp"
#include "../core/dm.hpp"
#include "../core/gp3d.hpp"
#include "../core/grid.hpp"
#include "../core/grid3.hpp"
#include "../core/phase.hpp"
#include "../core/stability.hpp"
#include "../core/toy.hpp"
#include "../core/util.hpp"

namespace {

thread_local std::string t_error;

template <typename Fn>
rg_status guard(Fn&& fn) {
  try {
    fn();
    return RG_OK;
  } catch (const rotgas::Error& e) {
    t_error = e.what();
    return static_cast<rg_status>(e.code);
  } catch (const std::bad_alloc&) {
    t_error = "out of memory";
    return RG_ERR_INTERNAL;
  } catch (const std::exception& e) {
    t_error = e.what();
    return RG_ERR_INTERNAL;
  } catch (...) {
    t_error = "unknown internal error";
    return RG_ERR_INTERNAL;
  }
}

rg_status invalid(const char* msg) {
  t_error = msg;
  return RG_ERR_INVALID;
}

}  // namespace

extern "C" {

/* ---- handles ----------------------------------------------------------- */

struct rg_trap {
  rotgas::TrapSpec spec;
};

struct rg_grid2 {
  rotgas::RadialGrid grid;
};

struct rg_channel_result {
  rotgas::RadialGrid grid;
  rotgas::ChannelResult res;
};

struct rg_channel_scan {
  rotgas::RadialGrid grid;
  rotgas::ChannelScan scan;
};

struct rg_dm_result {
  rotgas::RadialGrid grid;
  rotgas::DMResult res;
};

struct rg_grid3 {
  rotgas::CartGrid grid;
};

struct rg_gp_result {
  rotgas::CartGrid grid;
  rotgas::GPResult res;
  // Mid-plane slice and vortex table, laid out for the C accessors.
  std::vector<double> density;
  std::vector<double> phase;
  std::vector<double> vx, vy;
  std::vector<int32_t> vw;
};

struct rg_stability_report {
  rotgas::InstabilityScan scan;
  int32_t n_max_tested = 0;
};

struct rg_phase_scan {
  rotgas::PhaseScanResult res;
};

struct rg_gap_decay {
  rotgas::GapDecayTable table;
};

struct rg_toy_result {
  rotgas::ToyResult res;
  std::vector<double> eigs_desc;
};

/* ---- diagnostics -------------------------------------------------------- */

const char* rg_error_message(void) { return t_error.c_str(); }

const char* rg_version(void) { return "rotgas 1.0.0"; }

const char* rg_rng_contract(void) { return rotgas::Rng::contract(); }

/* ---- trap --------------------------------------------------------------- */

rg_status rg_trap_create(double radial_coeff, double s, double axial_coeff,
                         double p, double offset, rg_trap** out) {
  if (!out) return invalid("rg_trap_create: out is null");
  *out = nullptr;
  return guard([&] {
    auto t = std::make_unique<rg_trap>();
    t->spec.radial_coeff = radial_coeff;
    t->spec.s = s;
    t->spec.axial_coeff = axial_coeff;
    t->spec.p = p;
    t->spec.offset = offset;
    t->spec.validate();
    *out = t.release();
  });
}

void rg_trap_destroy(rg_trap* t) { delete t; }

rg_status rg_trap_eval(const rg_trap* t, double r, double z, double* out) {
  if (!t || !out) return invalid("rg_trap_eval: null argument");
  return guard([&] {
    rotgas::require(std::isfinite(r) && r >= 0.0, 2,
                    "rg_trap_eval: r must be finite and >= 0");
    rotgas::require(std::isfinite(z), 2, "rg_trap_eval: z must be finite");
    *out = t->spec(r, z);
  });
}

rg_status rg_trap_critical_omega(const rg_trap* t, double* out) {
  if (!t || !out) return invalid("rg_trap_critical_omega: null argument");
  return guard([&] { *out = t->spec.critical_omega(); });
}

/* ---- cylindrical grid --------------------------------------------------- */

rg_status rg_grid2_create(int32_t nr, int32_t nz, double r_max, double z_max,
                          rg_grid2** out) {
  if (!out) return invalid("rg_grid2_create: out is null");
  *out = nullptr;
  return guard([&] {
    auto g = std::make_unique<rg_grid2>();
    g->grid = rotgas::RadialGrid(nr, nz, r_max, z_max);
    *out = g.release();
  });
}

void rg_grid2_destroy(rg_grid2* g) { delete g; }

rg_status rg_grid2_dims(const rg_grid2* g, int32_t* nr, int32_t* nz,
                        double* r_max, double* z_max) {
  if (!g) return invalid("rg_grid2_dims: grid is null");
  if (nr) *nr = g->grid.nr;
  if (nz) *nz = g->grid.nz;
  if (r_max) *r_max = g->grid.r_max;
  if (z_max) *z_max = g->grid.z_max;
  return RG_OK;
}

/* ---- channel ------------------------------------------------------------ */

void rg_channel_opts_default(rg_channel_opts* o) {
  if (!o) return;
  rotgas::ChannelOpts d;
  o->tol = d.tol;
  o->max_iter = d.max_iter;
}

static rotgas::ChannelOpts to_channel_opts(const rg_channel_opts* o) {
  rotgas::ChannelOpts c;
  if (o) {
    c.tol = o->tol;
    c.max_iter = o->max_iter;
  }
  return c;
}

static void fill_channel_stats(const rotgas::ChannelResult& r,
                               rg_channel_stats* out) {
  out->n = r.n;
  out->converged = r.converged ? 1 : 0;
  out->iterations = r.iterations;
  out->energy = r.energy;
  out->mu_tilde = r.mu_tilde;
  out->residual = r.residual;
  out->quartic = r.quartic;
}

rg_status rg_channel_solve(const rg_grid2* g, const rg_trap* t, int32_t n,
                           double coupling, const rg_channel_opts* o,
                           rg_channel_result** out) {
  if (!g || !t || !out) return invalid("rg_channel_solve: null argument");
  *out = nullptr;
  return guard([&] {
    auto h = std::make_unique<rg_channel_result>();
    h->grid = g->grid;
    h->res = rotgas::channel_minimize(g->grid, t->spec, n, coupling,
                                      to_channel_opts(o));
    *out = h.release();
  });
}

void rg_channel_result_destroy(rg_channel_result* r) { delete r; }

rg_status rg_channel_result_stats(const rg_channel_result* r,
                                  rg_channel_stats* out) {
  if (!r || !out) return invalid("rg_channel_result_stats: null argument");
  fill_channel_stats(r->res, out);
  return RG_OK;
}

rg_status rg_channel_result_orbital(const rg_channel_result* r,
                                    const double** data, int32_t* nr,
                                    int32_t* nz) {
  if (!r || !data) return invalid("rg_channel_result_orbital: null argument");
  *data = r->res.orbital.data();
  if (nr) *nr = r->grid.nr;
  if (nz) *nz = r->grid.nz;
  return RG_OK;
}

/* ---- channel scan -------------------------------------------------------- */

rg_status rg_channel_scan_run(const rg_grid2* g, const rg_trap* t,
                              double coupling, int32_t n_max, double omega,
                              const rg_channel_opts* o, rg_channel_scan** out) {
  if (!g || !t || !out) return invalid("rg_channel_scan_run: null argument");
  *out = nullptr;
  return guard([&] {
    auto h = std::make_unique<rg_channel_scan>();
    h->grid = g->grid;
    h->scan = rotgas::channel_scan(g->grid, t->spec, coupling, n_max, omega,
                                   to_channel_opts(o));
    *out = h.release();
  });
}

void rg_channel_scan_destroy(rg_channel_scan* s) { delete s; }

rg_status rg_channel_scan_size(const rg_channel_scan* s, int32_t* count) {
  if (!s || !count) return invalid("rg_channel_scan_size: null argument");
  *count = static_cast<int32_t>(s->scan.rows.size());
  return RG_OK;
}

rg_status rg_channel_scan_stats(const rg_channel_scan* s, int32_t index,
                                rg_channel_stats* out) {
  if (!s || !out) return invalid("rg_channel_scan_stats: null argument");
  if (index < 0 || index >= static_cast<int32_t>(s->scan.rows.size()))
    return invalid("rg_channel_scan_stats: index out of range");
  fill_channel_stats(s->scan.rows[static_cast<size_t>(index)], out);
  return RG_OK;
}

rg_status rg_channel_scan_orbital(const rg_channel_scan* s, int32_t index,
                                  const double** data, int32_t* nr,
                                  int32_t* nz) {
  if (!s || !data) return invalid("rg_channel_scan_orbital: null argument");
  if (index < 0 || index >= static_cast<int32_t>(s->scan.rows.size()))
    return invalid("rg_channel_scan_orbital: index out of range");
  *data = s->scan.rows[static_cast<size_t>(index)].orbital.data();
  if (nr) *nr = s->grid.nr;
  if (nz) *nz = s->grid.nz;
  return RG_OK;
}

rg_status rg_channel_scan_best(const rg_channel_scan* s, double omega,
                               int32_t* best_n, double* value,
                               int32_t* bracketed) {
  if (!s) return invalid("rg_channel_scan_best: scan is null");
  return guard([&] {
    rotgas::BestSymmetric b = rotgas::best_symmetric(s->scan, omega);
    if (best_n) *best_n = b.n;
    if (value) *value = b.value;
    if (bracketed) *bracketed = b.bracketed ? 1 : 0;
  });
}

rg_status rg_channel_scan_critical_bound(const rg_channel_scan* s, int32_t N,
                                         double* out) {
  if (!s || !out)
    return invalid("rg_channel_scan_critical_bound: null argument");
  return guard([&] {
    std::vector<double> energies;
    energies.reserve(s->scan.rows.size());
    for (const auto& row : s->scan.rows) energies.push_back(row.energy);
    *out = rotgas::critical_omega_bound(energies, N);
  });
}

/* ---- density matrix ------------------------------------------------------ */

void rg_dm_opts_default(rg_dm_opts* o) {
  if (!o) return;
  rotgas::DMOpts d;
  o->gap_tol_rel = d.gap_tol_rel;
  o->max_iter = d.max_iter;
  o->n_hi = d.n_hi;
  o->occ_drop = d.occ_drop;
}

rg_status rg_dm_solve(const rg_grid2* g, const rg_trap* t, double omega,
                      double coupling, const rg_dm_opts* o,
                      rg_dm_result** out) {
  if (!g || !t || !out) return invalid("rg_dm_solve: null argument");
  *out = nullptr;
  return guard([&] {
    rotgas::DMOpts d;
    if (o) {
      d.gap_tol_rel = o->gap_tol_rel;
      d.max_iter = o->max_iter;
      d.n_hi = o->n_hi;
      d.occ_drop = o->occ_drop;
    }
    auto h = std::make_unique<rg_dm_result>();
    h->grid = g->grid;
    h->res = rotgas::dm_minimize(g->grid, t->spec, omega, coupling, d);
    *out = h.release();
  });
}

void rg_dm_result_destroy(rg_dm_result* r) { delete r; }

rg_status rg_dm_result_stats(const rg_dm_result* r, rg_dm_stats* out) {
  if (!r || !out) return invalid("rg_dm_result_stats: null argument");
  out->converged = r->res.converged ? 1 : 0;
  out->rank = r->res.rank;
  out->n_channels = static_cast<int32_t>(r->res.orbitals.size());
  out->iterations = r->res.iterations;
  out->energy = r->res.energy;
  out->gap = r->res.gap;
  out->lz_mean = r->res.lz_mean;
  out->lz_variance = r->res.lz_var;
  return RG_OK;
}

rg_status rg_dm_result_channel(const rg_dm_result* r, int32_t index,
                               int32_t* n, double* occupation) {
  if (!r) return invalid("rg_dm_result_channel: result is null");
  if (index < 0 || index >= static_cast<int32_t>(r->res.orbitals.size()))
    return invalid("rg_dm_result_channel: index out of range");
  const auto& orb = r->res.orbitals[static_cast<size_t>(index)];
  if (n) *n = orb.n;
  if (occupation) *occupation = orb.occ;
  return RG_OK;
}

rg_status rg_dm_result_orbital(const rg_dm_result* r, int32_t index,
                               const double** data, int32_t* nr, int32_t* nz) {
  if (!r || !data) return invalid("rg_dm_result_orbital: null argument");
  if (index < 0 || index >= static_cast<int32_t>(r->res.orbitals.size()))
    return invalid("rg_dm_result_orbital: index out of range");
  *data = r->res.orbitals[static_cast<size_t>(index)].f.data();
  if (nr) *nr = r->grid.nr;
  if (nz) *nz = r->grid.nz;
  return RG_OK;
}

rg_status rg_dm_result_history(const rg_dm_result* r, const double** energy,
                               const double** gap, int32_t* count) {
  if (!r) return invalid("rg_dm_result_history: result is null");
  size_t n = std::min(r->res.hist_energy.size(), r->res.hist_gap.size());
  if (energy) *energy = r->res.hist_energy.data();
  if (gap) *gap = r->res.hist_gap.data();
  if (count) *count = static_cast<int32_t>(n);
  return RG_OK;
}

/* ---- 3D GP ---------------------------------------------------------------- */

rg_status rg_grid3_create(int32_t n, double half_extent, rg_grid3** out) {
  if (!out) return invalid("rg_grid3_create: out is null");
  *out = nullptr;
  return guard([&] {
    auto g = std::make_unique<rg_grid3>();
    g->grid = rotgas::CartGrid(n, half_extent);
    *out = g.release();
  });
}

void rg_grid3_destroy(rg_grid3* g) { delete g; }

void rg_gp3_opts_default(rg_gp3_opts* o) {
  if (!o) return;
  rotgas::GPOpts d;
  o->tol = d.tol;
  o->max_iter = d.max_iter;
  o->stencil_order = d.stencil_order;
  o->multistart = static_cast<int32_t>(d.multistart);
  o->cascade = d.cascade ? 1 : 0;
  o->threads = d.threads;
}

rg_status rg_gp3_solve(const rg_grid3* g, const rg_trap* t, double omega,
                       double coupling, uint64_t seed, const rg_gp3_opts* o,
                       rg_gp_result** out) {
  if (!g || !t || !out) return invalid("rg_gp3_solve: null argument");
  *out = nullptr;
  return guard([&] {
    rotgas::GPOpts opts;
    if (o) {
      opts.tol = o->tol;
      opts.max_iter = o->max_iter;
      opts.stencil_order = o->stencil_order;
      rotgas::require(o->multistart > 0, 2,
                      "gp3d: multistart mask must be positive");
      opts.multistart = static_cast<unsigned>(o->multistart);
      opts.cascade = o->cascade != 0;
      opts.threads =
          o->threads <= 0 ? rotgas::hardware_threads() : o->threads;
    }
    opts.seed = seed;

    auto h = std::make_unique<rg_gp_result>();
    h->grid = g->grid;
    h->res = rotgas::gp_minimize(g->grid, t->spec, omega, coupling, opts);

    const rotgas::CartGrid& cg = h->grid;
    const int mid = cg.n / 2;
    h->density.resize(static_cast<size_t>(cg.n) * cg.n);
    h->phase.resize(static_cast<size_t>(cg.n) * cg.n);
    for (int i = 0; i < cg.n; ++i)
      for (int j = 0; j < cg.n; ++j) {
        rotgas::Cplx v = h->res.psi[static_cast<size_t>(cg.idx(i, j, mid))];
        h->density[static_cast<size_t>(i) * cg.n + j] = std::norm(v);
        h->phase[static_cast<size_t>(i) * cg.n + j] = std::arg(v);
      }
    h->vx.reserve(h->res.vortices.size());
    h->vy.reserve(h->res.vortices.size());
    h->vw.reserve(h->res.vortices.size());
    for (const auto& v : h->res.vortices) {
      h->vx.push_back(v.x);
      h->vy.push_back(v.y);
      h->vw.push_back(v.winding);
    }
    *out = h.release();
  });
}

void rg_gp_result_destroy(rg_gp_result* r) { delete r; }

rg_status rg_gp_result_stats(const rg_gp_result* r, rg_gp_stats* out) {
  if (!r || !out) return invalid("rg_gp_result_stats: null argument");
  out->converged = r->res.converged ? 1 : 0;
  out->iterations = r->res.iterations;
  out->energy = r->res.energy;
  out->mu = r->res.mu;
  out->residual = r->res.residual;
  out->quartic = r->res.quartic;
  out->lz_mean = r->res.lz_mean;
  out->lz_variance = r->res.lz_variance;
  return RG_OK;
}

rg_status rg_gp_result_init_label(const rg_gp_result* r, const char** label) {
  if (!r || !label) return invalid("rg_gp_result_init_label: null argument");
  *label = r->res.init_label.c_str();
  return RG_OK;
}

rg_status rg_gp_result_slice(const rg_gp_result* r, const double** density,
                             const double** phase, int32_t* nx, int32_t* ny) {
  if (!r) return invalid("rg_gp_result_slice: result is null");
  if (density) *density = r->density.data();
  if (phase) *phase = r->phase.data();
  if (nx) *nx = r->grid.n;
  if (ny) *ny = r->grid.n;
  return RG_OK;
}

rg_status rg_gp_result_vortices(const rg_gp_result* r, const double** x,
                                const double** y, const int32_t** winding,
                                int32_t* count, int32_t* skipped_plaquettes) {
  if (!r) return invalid("rg_gp_result_vortices: result is null");
  if (x) *x = r->vx.data();
  if (y) *y = r->vy.data();
  if (winding) *winding = r->vw.data();
  if (count) *count = static_cast<int32_t>(r->vw.size());
  if (skipped_plaquettes) *skipped_plaquettes = r->res.vortex_skipped;
  return RG_OK;
}

/* ---- stability ------------------------------------------------------------ */

rg_status rg_cn_upper(double n, double* out) {
  if (!out) return invalid("rg_cn_upper: out is null");
  return guard([&] { *out = rotgas::cn_upper_branch(n); });
}

rg_status rg_cn_lower(double n, double* out) {
  if (!out) return invalid("rg_cn_lower: out is null");
  return guard([&] { *out = rotgas::cn_lower_branch(n); });
}

rg_status rg_stability_scan(const rg_grid2* g, const rg_trap* t, double omega,
                            double coupling, const int32_t* n_list,
                            int32_t n_count, const double* L_grid,
                            int32_t L_count, const rg_channel_opts* o,
                            rg_stability_report** out) {
  if (!g || !t || !n_list || !L_grid || !out)
    return invalid("rg_stability_scan: null argument");
  if (n_count <= 0 || L_count <= 0)
    return invalid("rg_stability_scan: n_list and L_grid must be non-empty");
  *out = nullptr;
  return guard([&] {
    std::vector<int> ns(n_list, n_list + n_count);
    std::vector<double> Ls(L_grid, L_grid + L_count);
    auto h = std::make_unique<rg_stability_report>();
    h->scan = rotgas::instability_scan(g->grid, t->spec, omega, coupling, ns,
                                       Ls, to_channel_opts(o));
    h->n_max_tested = *std::max_element(ns.begin(), ns.end());
    *out = h.release();
  });
}

void rg_stability_report_destroy(rg_stability_report* r) { delete r; }

rg_status rg_stability_report_size(const rg_stability_report* r,
                                   int32_t* count) {
  if (!r || !count) return invalid("rg_stability_report_size: null argument");
  *count = static_cast<int32_t>(r->scan.rows.size());
  return RG_OK;
}

rg_status rg_stability_report_row(const rg_stability_report* r, int32_t index,
                                  rg_stability_row* out) {
  if (!r || !out) return invalid("rg_stability_report_row: null argument");
  if (index < 0 || index >= static_cast<int32_t>(r->scan.rows.size()))
    return invalid("rg_stability_report_row: index out of range");
  const rotgas::StabilityRow& s = r->scan.rows[static_cast<size_t>(index)];
  out->n = s.n;
  out->e_channel = s.e_channel;
  out->mu_tilde = s.mu_tilde;
  out->c_n = s.c_n;
  out->L_best = s.L_trial;
  out->q_min = s.q_value;
  out->unstable = s.unstable ? 1 : 0;
  out->a1_ratio = s.a1_ratio;
  out->a1_ratio_unsq = s.a1_ratio_unsq;
  out->a3_ratio = s.a3_ratio;
  out->axial_decay_ok = s.axial_decay_ok ? 1 : 0;
  return RG_OK;
}

rg_status rg_stability_report_q_values(const rg_stability_report* r,
                                       int32_t index, const double** q,
                                       int32_t* count) {
  if (!r || !q) return invalid("rg_stability_report_q_values: null argument");
  if (index < 0 || index >= static_cast<int32_t>(r->scan.rows.size()))
    return invalid("rg_stability_report_q_values: index out of range");
  const auto& row = r->scan.rows[static_cast<size_t>(index)];
  *q = row.q_by_L.data();
  if (count) *count = static_cast<int32_t>(row.q_by_L.size());
  return RG_OK;
}

rg_status rg_stability_report_summary(const rg_stability_report* r,
                                      int32_t* any_unstable,
                                      int32_t* first_unstable_n,
                                      int32_t* n_max_tested) {
  if (!r) return invalid("rg_stability_report_summary: report is null");
  bool any = r->scan.first_unstable >= 0;
  if (any_unstable) *any_unstable = any ? 1 : 0;
  if (first_unstable_n)
    *first_unstable_n =
        any ? r->scan.rows[static_cast<size_t>(r->scan.first_unstable)].n : -1;
  if (n_max_tested) *n_max_tested = r->n_max_tested;
  return RG_OK;
}

/* ---- phase diagram ---------------------------------------------------------- */

void rg_phase_opts_default(rg_phase_opts* o) {
  if (!o) return;
  rotgas::PhaseOpts d;
  o->tol_abs = d.tol_abs;
  o->tol_rel = d.tol_rel;
  o->refine = 1;
  o->threads = 1;
  o->fast = 0;
  o->with_3d = 1;
}

static rotgas::PhaseOpts to_phase_opts(const rg_phase_opts* o,
                                       uint64_t seed, bool point_mode) {
  rotgas::PhaseOpts p;
  p.seed = seed;
  if (o) {
    p.tol_abs = o->tol_abs;
    p.tol_rel = o->tol_rel;
    rotgas::require(o->refine >= 1 && o->refine <= 8, 2,
                    "phase: refine must be in [1, 8]");
    p.resolution = static_cast<double>(o->refine);
    p.with_3d = o->with_3d != 0;
    int threads = o->threads <= 0 ? rotgas::hardware_threads() : o->threads;
    if (point_mode) {
      p.threads = 1;
      p.gp.threads = threads;  // parallelize the multistart inside the point
    } else {
      p.threads = threads;  // parallelize over omega columns
      p.gp.threads = 1;
    }
    if (o->fast) p.gp.multistart = 1u | 2u | 8u;
  }
  return p;
}

static void fill_phase_point(const rotgas::PhasePointResult& p,
                             rg_phase_point* out) {
  out->omega = p.omega;
  out->g = p.g;
  out->e_gp_3d = p.e_gp_3d;
  out->e_gp_channel = p.e_gp_channel;
  out->e_dm = p.e_dm;
  out->margin = p.margin;
  out->dm_gap = p.dm_gap;
  out->lz_variance = p.lz_variance;
  out->dm_rank = p.dm_rank;
  out->in_xi = static_cast<int32_t>(p.in_xi);
  out->gp_converged = p.gp_converged ? 1 : 0;
  out->dm_converged = p.dm_converged ? 1 : 0;
  out->channel_bracketed = p.channel_bracketed ? 1 : 0;
  out->n_star = p.n_star;
}

rg_status rg_phase_point_solve(const rg_trap* t, double omega, double g,
                               uint64_t seed, const rg_phase_opts* o,
                               rg_phase_point* out) {
  if (!t || !out) return invalid("rg_phase_point_solve: null argument");
  return guard([&] {
    rotgas::PhasePointResult p =
        rotgas::phase_point(t->spec, omega, g, to_phase_opts(o, seed, true));
    fill_phase_point(p, out);
  });
}

rg_status rg_phase_scan_run(const rg_trap* t, const double* omegas,
                            int32_t n_omega, const double* gs, int32_t n_g,
                            uint64_t seed, const rg_phase_opts* o,
                            rg_phase_scan** out) {
  if (!t || !omegas || !gs || !out)
    return invalid("rg_phase_scan_run: null argument");
  if (n_omega <= 0 || n_g <= 0)
    return invalid("rg_phase_scan_run: omega and g lists must be non-empty");
  *out = nullptr;
  return guard([&] {
    std::vector<double> ov(omegas, omegas + n_omega);
    std::vector<double> gv(gs, gs + n_g);
    auto h = std::make_unique<rg_phase_scan>();
    h->res = rotgas::phase_scan(t->spec, std::move(ov), std::move(gv),
                                to_phase_opts(o, seed, false));
    *out = h.release();
  });
}

void rg_phase_scan_destroy(rg_phase_scan* s) { delete s; }

rg_status rg_phase_scan_size(const rg_phase_scan* s, int32_t* count) {
  if (!s || !count) return invalid("rg_phase_scan_size: null argument");
  *count = static_cast<int32_t>(s->res.points.size());
  return RG_OK;
}

rg_status rg_phase_scan_point(const rg_phase_scan* s, int32_t index,
                              rg_phase_point* out) {
  if (!s || !out) return invalid("rg_phase_scan_point: null argument");
  if (index < 0 || index >= static_cast<int32_t>(s->res.points.size()))
    return invalid("rg_phase_scan_point: index out of range");
  fill_phase_point(s->res.points[static_cast<size_t>(index)], out);
  return RG_OK;
}

rg_status rg_phase_locate_broken(const rg_phase_scan* s, rg_phase_point* out,
                                 int32_t* found) {
  if (!s) return invalid("rg_phase_locate_broken: scan is null");
  const rotgas::PhasePointResult* best = nullptr;
  for (const auto& p : s->res.points) {
    if (p.in_xi != rotgas::XiLabel::Inside) continue;
    if (p.margin < 1e-2 || p.dm_rank < 2 || p.lz_variance < 0.01) continue;
    if (!best || p.margin > best->margin) best = &p;
  }
  if (found) *found = best ? 1 : 0;
  if (best && out) fill_phase_point(*best, out);
  return RG_OK;
}

/* ---- channel gap decay -------------------------------------------------------- */

rg_status rg_gap_decay_run(const rg_trap* t, const double* gs, int32_t n_g,
                           const rg_phase_opts* o, rg_gap_decay** out) {
  if (!t || !gs || !out) return invalid("rg_gap_decay_run: null argument");
  if (n_g <= 0) return invalid("rg_gap_decay_run: coupling list is empty");
  *out = nullptr;
  return guard([&] {
    std::vector<double> gv(gs, gs + n_g);
    auto h = std::make_unique<rg_gap_decay>();
    h->table = rotgas::gap_decay_table(t->spec, std::move(gv),
                                       to_phase_opts(o, 1234, false));
    *out = h.release();
  });
}

void rg_gap_decay_destroy(rg_gap_decay* d) { delete d; }

rg_status rg_gap_decay_size(const rg_gap_decay* d, int32_t* count) {
  if (!d || !count) return invalid("rg_gap_decay_size: null argument");
  *count = static_cast<int32_t>(d->table.rows.size());
  return RG_OK;
}

rg_status rg_gap_decay_row(const rg_gap_decay* d, int32_t index, double* g,
                           double* gap0, double* gap1, double* gap2) {
  if (!d) return invalid("rg_gap_decay_row: table is null");
  if (index < 0 || index >= static_cast<int32_t>(d->table.rows.size()))
    return invalid("rg_gap_decay_row: index out of range");
  const rotgas::GapDecayRow& r = d->table.rows[static_cast<size_t>(index)];
  if (g) *g = r.g;
  if (gap0) *gap0 = r.gap[0];
  if (gap1) *gap1 = r.gap[1];
  if (gap2) *gap2 = r.gap[2];
  return RG_OK;
}

rg_status rg_gap_decay_summary(const rg_gap_decay* d, double* exponent,
                               int32_t* nonincreasing) {
  if (!d) return invalid("rg_gap_decay_summary: table is null");
  if (exponent) *exponent = d->table.predicted_exponent;
  if (nonincreasing) *nonincreasing = d->table.nonincreasing ? 1 : 0;
  return RG_OK;
}

/* ---- toy model --------------------------------------------------------------- */

rg_status rg_toy_solve(int32_t n_particles, int32_t n_modes, double omega,
                       double coupling, int32_t solver_kind,
                       rg_toy_result** out) {
  if (!out) return invalid("rg_toy_solve: out is null");
  *out = nullptr;
  return guard([&] {
    rotgas::require(solver_kind >= RG_TOY_AUTO && solver_kind <= RG_TOY_LANCZOS,
                    2, "rg_toy_solve: unknown solver kind");
    auto h = std::make_unique<rg_toy_result>();
    h->res = rotgas::toy_solve(n_particles, n_modes, omega, coupling,
                               static_cast<rotgas::ToySolver>(solver_kind));
    h->eigs_desc = h->res.rdm_eigenvalues;  // ascending from the core
    std::reverse(h->eigs_desc.begin(), h->eigs_desc.end());
    *out = h.release();
  });
}

void rg_toy_result_destroy(rg_toy_result* r) { delete r; }

rg_status rg_toy_result_stats(const rg_toy_result* r, rg_toy_stats* out) {
  if (!r || !out) return invalid("rg_toy_result_stats: null argument");
  const rotgas::ToyResult& t = r->res;
  out->dim_bose = t.dim_bose;
  out->dim_abs = t.dim_abs;
  out->total_m_bose = t.total_m_bose;
  out->total_m_abs = t.total_m_abs;
  out->ground_symmetric = t.sector_label == "symmetric" ? 1 : 0;
  out->e_bose = t.e_bose;
  out->e_abs = t.e_abs;
  out->gap = t.gap;
  out->condensate_fraction =
      r->eigs_desc.empty() ? 0.0 : r->eigs_desc.front();
  double trace = 0.0;
  for (double v : r->eigs_desc) trace += v;
  out->rdm_trace = trace;
  out->dense_mismatch = t.dense_mismatch;
  return RG_OK;
}

rg_status rg_toy_result_rdm(const rg_toy_result* r, const double** eigs,
                            int32_t* count) {
  if (!r || !eigs) return invalid("rg_toy_result_rdm: null argument");
  *eigs = r->eigs_desc.data();
  if (count) *count = static_cast<int32_t>(r->eigs_desc.size());
  return RG_OK;
}

} /* extern "C" */
