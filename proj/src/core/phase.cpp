#include "phase.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rotgas {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double v_eff(const TrapSpec& trap, double omega, double r, double z) {
  return trap(r, z) - 0.25 * omega * omega * r * r;
}

// Radius beyond which v_eff(r,0) stays above mu (doubling search; v_eff can
// dip before growing when the trap is steeper than harmonic).
double radial_box(const TrapSpec& trap, double omega, double mu) {
  double R = 1.0;
  for (int it = 0; it < 120; ++it) {
    if (v_eff(trap, omega, R, 0.0) > mu &&
        v_eff(trap, omega, 2.0 * R, 0.0) > mu &&
        v_eff(trap, omega, 4.0 * R, 0.0) > mu)
      return R;
    R *= 1.5;
  }
  fail(2, "phase: effective potential never exceeds the trial chemical "
          "potential (omega too close to critical?)");
}

double axial_box(const TrapSpec& trap, double mu) {
  double Z = 1.0;
  for (int it = 0; it < 120; ++it) {
    if (trap(0.0, Z) > mu) return Z;
    Z *= 1.5;
  }
  fail(2, "phase: axial potential never exceeds the trial chemical potential");
}

// Thomas-Fermi mass at chemical potential mu for the rotating-frame
// effective potential (midpoint quadrature).
double tf_mass(const TrapSpec& trap, double omega, double coupling,
               double mu) {
  const int nq = 280;
  double R = radial_box(trap, omega, mu);
  double Z = axial_box(trap, mu);
  double dr = R / nq, dz = Z / nq;
  double acc = 0.0;
  for (int i = 0; i < nq; ++i) {
    double r = (i + 0.5) * dr;
    double rad = 0.0;
    for (int j = 0; j < nq; ++j) {
      double z = (j + 0.5) * dz;
      double dv = mu - v_eff(trap, omega, r, z);
      if (dv > 0.0) rad += dv;
    }
    acc += rad * 2.0 * kPi * r;
  }
  // factor 2: z-symmetric quadrature over z > 0 only
  return acc * dr * dz * 2.0 / (8.0 * kPi * coupling);
}

double tf_mu(const TrapSpec& trap, double omega, double coupling) {
  double vmin = trap(0.0, 0.0);  // harmonic-or-steeper traps bottom at 0
  double lo = vmin, hi = vmin + 4.0;
  for (int it = 0; it < 80 && tf_mass(trap, omega, coupling, hi) < 1.0; ++it)
    hi = vmin + 2.0 * (hi - vmin);
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    (tf_mass(trap, omega, coupling, mid) < 1.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double cloud_radius(const TrapSpec& trap, double omega, double mu) {
  double R = radial_box(trap, omega, mu);
  const int ns = 20000;
  for (int i = ns; i >= 1; --i) {
    double r = R * i / ns;
    if (v_eff(trap, omega, r, 0.0) <= mu) return r;
  }
  return 0.0;
}

double cloud_height(const TrapSpec& trap, double mu) {
  double Z = axial_box(trap, mu);
  const int ns = 20000;
  for (int i = ns; i >= 1; --i) {
    double z = Z * i / ns;
    if (trap(0.0, z) <= mu) return z;
  }
  return 0.0;
}

int round_up(int v, int mult) { return ((v + mult - 1) / mult) * mult; }

}  // namespace

PhaseGrids phase_grids(const TrapSpec& trap, double omega, double g,
                       double resolution) {
  trap.validate();
  require(std::isfinite(g) && g >= 0.0, 2, "phase: coupling must be >= 0");
  require(std::abs(omega) < trap.critical_omega(), 2,
          "phase: |omega| must stay below the critical rotation speed");
  require(resolution >= 0.25 && resolution <= 8.0, 2,
          "phase: resolution multiplier out of range [0.25, 8]");

  PhaseGrids pg;
  double vmin = trap(0.0, 0.0);
  double mu = (g > 1e-6) ? tf_mu(trap, omega, g) : vmin + 3.0;
  pg.mu_estimate = mu;
  pg.r_cloud = cloud_radius(trap, omega, mu);
  pg.z_cloud = cloud_height(trap, mu);
  double xi = 1.0 / std::sqrt(std::max(1.0, mu - vmin));

  double r_max = std::max(7.0, 1.25 * pg.r_cloud + std::max(2.0, 6.0 * xi));
  double z_max = std::max(6.0, pg.z_cloud + std::max(2.0, 5.0 * xi));
  // The ceilings bound the absolute O(h^2) energy bias of the cylindrical
  // discretization (~1e-3 at h_r = 0.065 for weak coupling), which matters
  // when comparing against the spectral-accuracy Cartesian energies; the
  // floors bound cost at strong coupling where xi is tiny.
  double dr_t = std::clamp(xi / 3.5, 0.02, 0.035);
  double dz_t = std::clamp(xi / 3.0, 0.025, 0.042);
  int nr = std::clamp(round_up((int)std::ceil(r_max / dr_t * resolution), 16),
                      96, 2048);
  int nz = std::clamp(
      round_up((int)std::ceil(2.0 * z_max / dz_t * resolution), 16), 64, 2048);
  pg.cyl = RadialGrid(nr, nz, r_max, z_max);

  double half =
      std::max(6.5, std::max(pg.r_cloud, pg.z_cloud) + std::max(2.0, 6.0 * xi));
  double h_t = std::clamp(0.8 * xi, 0.10, 0.22);
  int n3 = std::clamp(round_up((int)std::ceil(2.0 * half / h_t * resolution), 8),
                      48, 176);
  pg.cart = CartGrid(n3, half);
  pg.stencil_order = 4;
  return pg;
}

PhasePointResult phase_point(const TrapSpec& trap, double omega, double g,
                             const PhaseOpts& opts,
                             const std::vector<DMOrbital>* warm,
                             const RadialGrid* warm_grid,
                             std::vector<DMOrbital>* warm_out,
                             RadialGrid* warm_grid_out) {
  PhaseGrids pg = phase_grids(trap, omega, g, opts.resolution);
  PhasePointResult P;
  P.omega = omega;
  P.g = g;

  ChannelScan scan = channel_scan(pg.cyl, trap, g, opts.n_max, omega,
                                  opts.chan);
  BestSymmetric bs = best_symmetric(scan, omega);
  P.e_gp_channel = bs.value;
  P.n_star = bs.n;
  P.channel_bracketed = bs.bracketed;

  std::vector<DMOrbital> warm_local;
  const std::vector<DMOrbital>* wptr = nullptr;
  if (warm && warm_grid && !warm->empty()) {
    warm_local = *warm;
    bool same = warm_grid->nr == pg.cyl.nr && warm_grid->nz == pg.cyl.nz &&
                warm_grid->r_max == pg.cyl.r_max &&
                warm_grid->z_max == pg.cyl.z_max;
    if (!same)
      for (auto& o : warm_local) o.f = regrid(*warm_grid, o.f, pg.cyl);
    wptr = &warm_local;
  }
  DMResult dm = dm_minimize(pg.cyl, trap, omega, g, opts.dm, wptr);
  P.e_dm = dm.energy;
  P.dm_gap = dm.gap;
  P.dm_rank = dm.rank;
  P.dm_converged = dm.converged;
  if (warm_out) *warm_out = dm.orbitals;
  if (warm_grid_out) *warm_grid_out = pg.cyl;

  double e3 = kInf;
  if (opts.with_3d) {
    GPOpts gpo = opts.gp;
    gpo.stencil_order = pg.stencil_order;
    gpo.seed = opts.seed;
    require(bs.n >= 0 && bs.n < (int)scan.rows.size(), 4,
            "phase: channel scan returned no rows");
    ChannelSeed cs{&pg.cyl, &scan.rows[bs.n].orbital, bs.n};
    GPResult gp = gp_minimize(pg.cart, trap, omega, g, gpo, &cs);
    e3 = gp.energy;
    P.gp_converged = gp.converged;
    P.gp_init = gp.init_label;
    P.lz_variance = gp.lz_variance;
  }
  P.e_gp_3d = e3;
  P.margin = std::min(e3, P.e_gp_channel) - P.e_dm;

  double tol = std::max(opts.tol_abs, opts.tol_rel * std::abs(P.e_dm));
  bool pure_trusted = bs.bracketed && (!opts.with_3d || P.gp_converged);
  if (!dm.converged) {
    // Duality gap above tolerance: the density-matrix value is only an
    // upper bound with unknown slack, so no classification is certified.
    P.in_xi = XiLabel::Indeterminate;
  } else if (P.margin > tol && P.dm_rank >= 2) {
    // Membership additionally needs trustworthy pure-state minima.
    P.in_xi = pure_trusted ? XiLabel::Inside : XiLabel::Indeterminate;
  } else {
    P.in_xi = XiLabel::Outside;
  }
  return P;
}

PhaseScanResult phase_scan(const TrapSpec& trap, std::vector<double> omegas,
                           std::vector<double> gs, const PhaseOpts& opts) {
  require(!omegas.empty() && !gs.empty(), 2,
          "phase_scan: omega and g lists must be nonempty");
  std::sort(omegas.begin(), omegas.end());
  std::sort(gs.begin(), gs.end());
  require(std::adjacent_find(omegas.begin(), omegas.end()) == omegas.end(), 2,
          "phase_scan: duplicate omega values");
  require(std::adjacent_find(gs.begin(), gs.end()) == gs.end(), 2,
          "phase_scan: duplicate g values");

  PhaseScanResult out;
  out.omegas = omegas;
  out.gs = gs;
  out.points.resize(omegas.size() * gs.size());

  // Columns (fixed omega) are independent; within a column the DM solve is
  // warm-started from the previous coupling.
  parallel_for((int64_t)omegas.size(), opts.threads, [&](int64_t ci) {
    std::vector<DMOrbital> warm;
    RadialGrid warm_grid;
    bool have_warm = false;
    for (size_t gi = 0; gi < gs.size(); ++gi) {
      std::vector<DMOrbital> next;
      RadialGrid next_grid;
      PhasePointResult p = phase_point(
          trap, omegas[ci], gs[gi], opts, have_warm ? &warm : nullptr,
          have_warm ? &warm_grid : nullptr, &next, &next_grid);
      warm = std::move(next);
      warm_grid = next_grid;
      have_warm = !warm.empty();
      out.points[ci * gs.size() + gi] = std::move(p);
    }
  });
  return out;
}

GapDecayTable gap_decay_table(const TrapSpec& trap, std::vector<double> gs,
                              const PhaseOpts& opts) {
  require(!gs.empty(), 2, "gap_decay_table: empty coupling list");
  std::sort(gs.begin(), gs.end());
  for (double g : gs)
    require(std::isfinite(g) && g > 0.0, 2,
            "gap_decay_table: couplings must be positive");

  GapDecayTable table;
  table.predicted_exponent =
      -(2.0 / trap.s) * (2.0 + 2.0 / trap.s + 1.0 / trap.p);
  table.rows.resize(gs.size());
  parallel_for((int64_t)gs.size(), opts.threads, [&](int64_t gi) {
    PhaseGrids pg = phase_grids(trap, 0.0, gs[gi], opts.resolution);
    GapDecayRow row;
    row.g = gs[gi];
    double e[4];
    Field2 warm;
    for (int n = 0; n <= 3; ++n) {
      ChannelResult cr = channel_minimize(pg.cyl, trap, n, gs[gi], opts.chan,
                                          warm.empty() ? nullptr : &warm);
      e[n] = cr.energy;
      warm = cr.orbital;
    }
    for (int n = 0; n < 3; ++n) row.gap[n] = e[n + 1] - e[n];
    table.rows[gi] = row;
  });

  table.nonincreasing = true;
  for (size_t i = 0; i + 1 < table.rows.size(); ++i)
    for (int k = 0; k < 3; ++k) {
      double slack = 1e-8 * (1.0 + std::abs(table.rows[i].gap[k]));
      if (table.rows[i + 1].gap[k] > table.rows[i].gap[k] + slack)
        table.nonincreasing = false;
    }
  return table;
}

}  // namespace rotgas
