/* rotgas — solvers for mean-field models of a rotating, trapped dilute Bose gas.
 *
 * C interface. All functions return an rg_status; results are returned
 * through opaque handles that must be destroyed with the matching
 * rg_*_destroy call. Array/string views returned by accessors stay valid
 * until the owning handle is destroyed.
 *
 * Thread safety: handles are not internally synchronized; do not share a
 * mutable handle across threads. Distinct handles are independent. Solver
 * entry points take an explicit thread budget where parallelism applies.
 */

#ifndef ROTGAS_H
#define ROTGAS_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* ---- status codes (CLI exit codes reuse the same numbering) ---------- */

typedef int32_t rg_status;

#define RG_OK 0
#define RG_ERR_INVALID 2     /* bad argument / config value            */
#define RG_ERR_CONVERGENCE 3 /* solver failed to reach its tolerance   */
#define RG_ERR_IO 4          /* file/serialization failure             */
#define RG_ERR_INTERNAL 6

/* Detail message for the most recent failure on this thread. */
const char* rg_error_message(void);

const char* rg_version(void);

/* Name and version of the deterministic RNG stream contract
 * (same seed -> same stream across builds and platforms). */
const char* rg_rng_contract(void);

/* ---- trap potential --------------------------------------------------- */
/* V(r,z) = radial_coeff * r^s + axial_coeff * |z|^p + offset,
 * s >= 2, p >= 2, radial_coeff > 0, axial_coeff > 0. */

typedef struct rg_trap rg_trap;

rg_status rg_trap_create(double radial_coeff, double s, double axial_coeff,
                         double p, double offset, rg_trap** out);
void rg_trap_destroy(rg_trap* t);
rg_status rg_trap_eval(const rg_trap* t, double r, double z, double* out);
/* Largest rotation speed with bounded [V - omega^2 r^2 / 4]_- :
 * 2*sqrt(radial_coeff) when s == 2, +infinity when s > 2. */
rg_status rg_trap_critical_omega(const rg_trap* t, double* out);

/* ---- cylindrical grid (r,z), cell-centered, Dirichlet outer walls ----- */

typedef struct rg_grid2 rg_grid2;

rg_status rg_grid2_create(int32_t nr, int32_t nz, double r_max, double z_max,
                          rg_grid2** out);
void rg_grid2_destroy(rg_grid2* g);
rg_status rg_grid2_dims(const rg_grid2* g, int32_t* nr, int32_t* nz,
                        double* r_max, double* z_max);

/* ---- single angular-momentum channel ---------------------------------- */

typedef struct {
  double tol;       /* relative Euler-Lagrange residual target (<= tol*|mu|) */
  int64_t max_iter; /* hard iteration cap */
} rg_channel_opts;

void rg_channel_opts_default(rg_channel_opts* o);

typedef struct {
  int32_t n;         /* angular momentum of the channel */
  int32_t converged; /* 1 if the residual target was met */
  int64_t iterations;
  double energy;   /* E_n(g) */
  double mu_tilde; /* E_n(g) + 4*pi*g * int f^4 */
  double residual; /* || H f - mu_tilde f ||_w */
  double quartic;  /* int f^4 (weighted quadrature) */
} rg_channel_stats;

typedef struct rg_channel_result rg_channel_result;

rg_status rg_channel_solve(const rg_grid2* g, const rg_trap* t, int32_t n,
                           double coupling, const rg_channel_opts* o,
                           rg_channel_result** out);
void rg_channel_result_destroy(rg_channel_result* r);
rg_status rg_channel_result_stats(const rg_channel_result* r,
                                  rg_channel_stats* out);
/* Row-major orbital values f(i_r, i_z); view into the handle. */
rg_status rg_channel_result_orbital(const rg_channel_result* r,
                                    const double** data, int32_t* nr,
                                    int32_t* nz);

/* ---- channel scan over n = 0..n_max ----------------------------------- */

typedef struct rg_channel_scan rg_channel_scan;

/* n_max >= 0 scans exactly 0..n_max; n_max < 0 selects the range
 * adaptively for the given omega (stops once E_n - n*omega has risen for
 * three consecutive n and mu_tilde_n >= 0.9 * n * critical_omega). */
rg_status rg_channel_scan_run(const rg_grid2* g, const rg_trap* t,
                              double coupling, int32_t n_max, double omega,
                              const rg_channel_opts* o, rg_channel_scan** out);
void rg_channel_scan_destroy(rg_channel_scan* s);
rg_status rg_channel_scan_size(const rg_channel_scan* s, int32_t* count);
rg_status rg_channel_scan_stats(const rg_channel_scan* s, int32_t index,
                                rg_channel_stats* out);
rg_status rg_channel_scan_orbital(const rg_channel_scan* s, int32_t index,
                                  const double** data, int32_t* nr,
                                  int32_t* nz);
/* Best symmetric value: min_n (E_n - n*omega). bracketed == 0 warns that
 * the minimum sits on the scan edge (n_max too small). */
rg_status rg_channel_scan_best(const rg_channel_scan* s, double omega,
                               int32_t* best_n, double* value,
                               int32_t* bracketed);
/* max_{0<=n<N} (E_N - E_n)/(N - n): rotation speeds above this value rule
 * out every channel below N as the symmetric minimizer. */
rg_status rg_channel_scan_critical_bound(const rg_channel_scan* s, int32_t N,
                                         double* out);

/* ---- density-matrix minimization -------------------------------------- */

typedef struct {
  double gap_tol_rel; /* stop when duality gap <= gap_tol_rel * max(1,|E|) */
  int64_t max_iter;   /* Frank-Wolfe iteration cap */
  int32_t n_hi;       /* highest channel considered; < 0 -> adaptive */
  double occ_drop;    /* occupations below this are dropped */
} rg_dm_opts;

void rg_dm_opts_default(rg_dm_opts* o);

typedef struct {
  int32_t converged;
  int32_t rank;       /* occupations > 1e-6 */
  int32_t n_channels; /* stored channels (occupation > occ_drop) */
  int64_t iterations; /* Frank-Wolfe iterations used */
  double energy;      /* E^DM */
  double gap;         /* duality gap at the returned state (>= 0) */
  double lz_mean;     /* sum lambda_j * n_j */
  double lz_variance; /* sum lambda_j n_j^2 - lz_mean^2 */
} rg_dm_stats;

typedef struct rg_dm_result rg_dm_result;

rg_status rg_dm_solve(const rg_grid2* g, const rg_trap* t, double omega,
                      double coupling, const rg_dm_opts* o,
                      rg_dm_result** out);
void rg_dm_result_destroy(rg_dm_result* r);
rg_status rg_dm_result_stats(const rg_dm_result* r, rg_dm_stats* out);
rg_status rg_dm_result_channel(const rg_dm_result* r, int32_t index,
                               int32_t* n, double* occupation);
rg_status rg_dm_result_orbital(const rg_dm_result* r, int32_t index,
                               const double** data, int32_t* nr, int32_t* nz);
/* Energy / duality-gap history, one entry per accepted iteration. */
rg_status rg_dm_result_history(const rg_dm_result* r, const double** energy,
                               const double** gap, int32_t* count);

/* ---- 3D Gross-Pitaevskii minimization --------------------------------- */

/* Cubic box [-half_extent, half_extent]^3, n cells per axis. */
typedef struct rg_grid3 rg_grid3;

rg_status rg_grid3_create(int32_t n, double half_extent, rg_grid3** out);
void rg_grid3_destroy(rg_grid3* g);

typedef struct {
  double tol;            /* relative residual target */
  int64_t max_iter;      /* per-start iteration cap on the finest level */
  int32_t stencil_order; /* 2 or 4 */
  int32_t multistart;    /* bitmask: 1 gaussian, 2 vortex, 4 m-fold ring,
                            8 best channel state, 16 seeded random */
  int32_t cascade;       /* 1 -> converge on a coarsened grid first */
  int32_t threads;       /* <= 0 -> hardware default */
} rg_gp3_opts;

void rg_gp3_opts_default(rg_gp3_opts* o);

typedef struct {
  int32_t converged;
  int64_t iterations;
  double energy;
  double mu; /* energy + 4*pi*g * int |psi|^4 */
  double residual;
  double quartic; /* int |psi|^4 */
  double lz_mean;
  double lz_variance;
} rg_gp_stats;

typedef struct rg_gp_result rg_gp_result;

rg_status rg_gp3_solve(const rg_grid3* g, const rg_trap* t, double omega,
                       double coupling, uint64_t seed, const rg_gp3_opts* o,
                       rg_gp_result** out);
void rg_gp_result_destroy(rg_gp_result* r);
rg_status rg_gp_result_stats(const rg_gp_result* r, rg_gp_stats* out);
/* Label of the winning initialization ("gaussian", "vortex+1", ...). */
rg_status rg_gp_result_init_label(const rg_gp_result* r, const char** label);
/* Density |psi|^2 and phase arg(psi) on the z-slice nearest z=0,
 * row-major (i_x, i_y); views into the handle. */
rg_status rg_gp_result_slice(const rg_gp_result* r, const double** density,
                             const double** phase, int32_t* nx, int32_t* ny);
/* Detected vortices on that slice: arrays of x, y, winding. */
rg_status rg_gp_result_vortices(const rg_gp_result* r, const double** x,
                                const double** y, const int32_t** winding,
                                int32_t* count, int32_t* skipped_plaquettes);

/* ---- stability / instability machinery -------------------------------- */

/* c_n constants. Upper branch: sqrt(pi)*Gamma(n+1/2)/(n*Gamma(n)), n >= 1.
 * Lower branch (0 < n <= 1):
 * [2^-n ((2-n)/n)^(n/2) pi csc(n pi/2) / ((2-n) Gamma(n))]^(1/n). */
rg_status rg_cn_upper(double n, double* out);
rg_status rg_cn_lower(double n, double* out);

typedef struct {
  int32_t n;
  double e_channel; /* E_n(g) */
  double mu_tilde;
  double c_n;
  double L_best;        /* axial dilation minimizing Q over the L grid */
  double q_min;         /* Q(w) at L_best */
  int32_t unstable;     /* q_min < 0 */
  double a1_ratio;      /* max f^2 / (mu_tilde/(8 pi g)); <= 1+5dr expected */
  double a1_ratio_unsq; /* max f   / (mu_tilde/(8 pi g)); reported only */
  double a3_ratio;      /* max r^-2n j_n / ((2 c_n^2 mu)^n max j_n) */
  int32_t axial_decay_ok; /* qualitative WKB decay check past the shell */
} rg_stability_row;

typedef struct rg_stability_report rg_stability_report;

rg_status rg_stability_scan(const rg_grid2* g, const rg_trap* t, double omega,
                            double coupling, const int32_t* n_list,
                            int32_t n_count, const double* L_grid,
                            int32_t L_count, const rg_channel_opts* o,
                            rg_stability_report** out);
void rg_stability_report_destroy(rg_stability_report* r);
rg_status rg_stability_report_size(const rg_stability_report* r,
                                   int32_t* count);
rg_status rg_stability_report_row(const rg_stability_report* r, int32_t index,
                                  rg_stability_row* out);
/* Q(w) at every axial dilation of the L grid for row `index`, in the order
 * the L values were passed; view into the handle. */
rg_status rg_stability_report_q_values(const rg_stability_report* r,
                                       int32_t index, const double** q,
                                       int32_t* count);
rg_status rg_stability_report_summary(const rg_stability_report* r,
                                      int32_t* any_unstable,
                                      int32_t* first_unstable_n,
                                      int32_t* n_max_tested);

/* ---- phase diagram (symmetry-breaking region) -------------------------- */

typedef struct {
  double omega;
  double g;
  double e_gp_3d;
  double e_gp_channel; /* min_n (E_n - n*omega) */
  double e_dm;
  double margin; /* min(e_gp_3d, e_gp_channel) - e_dm */
  double dm_gap;
  double lz_variance; /* of the 3D minimizer */
  int32_t dm_rank;
  int32_t in_xi; /* 1 inside, 0 outside, -1 indeterminate (uncertified) */
  int32_t gp_converged;
  int32_t dm_converged;
  int32_t channel_bracketed;
  int32_t n_star; /* argmin of E_n - n*omega */
} rg_phase_point;

typedef struct {
  double tol_abs; /* margin must exceed max(tol_abs, tol_rel*|e_dm|) */
  double tol_rel;
  int32_t refine;  /* grid resolution multiplier (1 = base) */
  int32_t threads;
  int32_t fast;    /* 1 -> trimmed multistart family for quick scans */
  int32_t with_3d; /* 0 -> skip the 3D solve (margin from channels only) */
} rg_phase_opts;

void rg_phase_opts_default(rg_phase_opts* o);

typedef struct rg_phase_scan rg_phase_scan;

rg_status rg_phase_point_solve(const rg_trap* t, double omega, double g,
                               uint64_t seed, const rg_phase_opts* o,
                               rg_phase_point* out);
rg_status rg_phase_scan_run(const rg_trap* t, const double* omegas,
                            int32_t n_omega, const double* gs, int32_t n_g,
                            uint64_t seed, const rg_phase_opts* o,
                            rg_phase_scan** out);
void rg_phase_scan_destroy(rg_phase_scan* s);
rg_status rg_phase_scan_size(const rg_phase_scan* s, int32_t* count);
rg_status rg_phase_scan_point(const rg_phase_scan* s, int32_t index,
                              rg_phase_point* out);
/* Strongest symmetry-broken point of the scan (largest margin among points
 * with in_xi == 1, margin >= 1e-2, dm_rank >= 2, lz_variance >= 0.01).
 * found == 0 if no point qualifies. */
rg_status rg_phase_locate_broken(const rg_phase_scan* s, rg_phase_point* out,
                                 int32_t* found);

/* Consecutive channel gaps E_{n+1}(g) - E_n(g), n in {0,1,2}, along a
 * coupling list (omega = 0), plus the predicted large-g decay exponent
 * -(2/s)(2 + 2/s + 1/p) of the critical-velocity gap. */
typedef struct rg_gap_decay rg_gap_decay;

rg_status rg_gap_decay_run(const rg_trap* t, const double* gs, int32_t n_g,
                           const rg_phase_opts* o, rg_gap_decay** out);
void rg_gap_decay_destroy(rg_gap_decay* d);
rg_status rg_gap_decay_size(const rg_gap_decay* d, int32_t* count);
rg_status rg_gap_decay_row(const rg_gap_decay* d, int32_t index, double* g,
                           double* gap0, double* gap1, double* gap2);
rg_status rg_gap_decay_summary(const rg_gap_decay* d, double* exponent,
                               int32_t* nonincreasing);

/* ---- few-body toy model (exact diagonalization) ------------------------ */

#define RG_TOY_AUTO 0    /* Lanczos, cross-checked against dense when small */
#define RG_TOY_DENSE 1   /* dense only (dim <= 2000) */
#define RG_TOY_LANCZOS 2 /* Lanczos only */

typedef struct {
  int32_t dim_bose;
  int32_t dim_abs; /* distinguishable tensor space dimension */
  int32_t total_m_bose; /* total angular momentum of the bosonic ground */
  int32_t total_m_abs;
  int32_t ground_symmetric; /* 1 if the absolute ground lies in the
                               symmetric sector (within tolerance) */
  double e_bose; /* ground energy over permutation-symmetric states */
  double e_abs;  /* absolute ground energy (distinguishable space) */
  double gap;    /* e_bose - e_abs (>= 0 up to solver tolerance) */
  double condensate_fraction; /* largest 1-RDM eigenvalue */
  double rdm_trace;           /* sum of 1-RDM eigenvalues (should be 1) */
  double dense_mismatch; /* |iterative - dense| when cross-checked, else -1 */
} rg_toy_stats;

typedef struct rg_toy_result rg_toy_result;

/* n_particles <= 4, n_modes <= 6; modes are the lowest-radial 2D oscillator
 * levels with angular momentum m = 0..n_modes-1 and energy 2(m+1);
 * the contact coupling is an effective constant (no scattering rescaling). */
rg_status rg_toy_solve(int32_t n_particles, int32_t n_modes, double omega,
                       double coupling, int32_t solver_kind,
                       rg_toy_result** out);
void rg_toy_result_destroy(rg_toy_result* r);
rg_status rg_toy_result_stats(const rg_toy_result* r, rg_toy_stats* out);
/* 1-RDM eigenvalues (descending), normalized to sum 1. */
rg_status rg_toy_result_rdm(const rg_toy_result* r, const double** eigs,
                            int32_t* count);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* ROTGAS_H */
