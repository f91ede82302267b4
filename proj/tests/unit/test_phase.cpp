// Phase-diagram driver: grid policy, point classification, scan layout,
// and the channel-gap decay table.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "core/phase.hpp"
#include "core/util.hpp"

using namespace rotgas;

TEST_CASE("grid policy: bounds, rounding, and Thomas-Fermi scaling") {
  TrapSpec trap;
  for (double g : {0.0, 0.1, 10.0, 1000.0}) {
    for (double omega : {0.0, 1.5}) {
      PhaseGrids pg = phase_grids(trap, omega, g, 1.0);
      CHECK(pg.cyl.nr % 16 == 0);
      CHECK(pg.cyl.nz % 16 == 0);
      CHECK(pg.cyl.nr >= 96);
      CHECK(pg.cart.n % 8 == 0);
      CHECK(pg.cart.n >= 48);
      CHECK(pg.cart.n <= 176);
      CHECK(pg.stencil_order == 4);
      CHECK(pg.cyl.r_max >= 1.25 * pg.r_cloud);
      CHECK(pg.cart.half >= pg.r_cloud);
      CHECK(pg.cart.half >= pg.z_cloud);
    }
  }

  // Strong coupling at rest: mu approaches the Thomas-Fermi value
  // (15 g)^{2/5} for the unit harmonic trap.
  PhaseGrids pg = phase_grids(trap, 0.0, 1000.0, 1.0);
  double mu_tf = std::pow(15.0 * 1000.0, 0.4);
  CHECK(pg.mu_estimate == doctest::Approx(mu_tf).epsilon(0.02));
  CHECK(pg.r_cloud == doctest::Approx(std::sqrt(mu_tf)).epsilon(0.02));

  // Rotation inflates the radial cloud: at omega = 1.5 the effective
  // radial curvature drops to 1 - omega^2/4.
  PhaseGrids pr = phase_grids(trap, 1.5, 1000.0, 1.0);
  CHECK(pr.r_cloud > 1.2 * pg.r_cloud);

  // The resolution multiplier refines both grids.
  PhaseGrids p2 = phase_grids(trap, 0.0, 10.0, 2.0);
  PhaseGrids p1 = phase_grids(trap, 0.0, 10.0, 1.0);
  CHECK(p2.cyl.nr >= 2 * p1.cyl.nr - 16);
  CHECK(p2.cart.n >= std::min(176, 2 * p1.cart.n - 8));

  CHECK_THROWS_AS(phase_grids(trap, 2.1, 1.0, 1.0), Error);
  CHECK_THROWS_AS(phase_grids(trap, 0.0, -1.0, 1.0), Error);
  CHECK_THROWS_AS(phase_grids(trap, 0.0, 1.0, 100.0), Error);
}

TEST_CASE("a point at rest is symmetric with margin at the tolerance floor") {
  TrapSpec trap;
  PhaseOpts o;
  o.with_3d = false;  // channel bound only: cheap and sufficient at rest
  o.resolution = 0.5;  // classification logic is resolution-independent
  PhasePointResult p = phase_point(trap, 0.0, 10.0, o);
  CHECK(p.dm_converged);
  CHECK(p.dm_rank == 1);
  CHECK(p.n_star == 0);
  CHECK(p.channel_bracketed);
  CHECK(p.in_xi == XiLabel::Outside);
  // DM equals channel 0 at rest, so the margin is numerically zero.
  CHECK(std::abs(p.margin) < 1e-6);
  CHECK(p.e_gp_3d == std::numeric_limits<double>::infinity());
  CHECK(p.lz_variance == 0.0);
}

TEST_CASE("an unconverged density-matrix solve labels the point "
          "indeterminate") {
  TrapSpec trap;
  PhaseOpts o;
  o.with_3d = false;
  o.resolution = 0.5;
  o.dm.max_iter = 1;  // starve the solver
  PhasePointResult p = phase_point(trap, 1.8, 100.0, o);
  CHECK(!p.dm_converged);
  CHECK(p.in_xi == XiLabel::Indeterminate);
}

TEST_CASE("scan layout: sorted axes, row-major points, warm-start "
          "consistency") {
  TrapSpec trap;
  PhaseOpts o;
  o.with_3d = false;
  o.resolution = 0.5;
  PhaseScanResult s = phase_scan(trap, {0.5, 0.0}, {1.0, 0.1}, o);
  REQUIRE(s.omegas.size() == 2);
  REQUIRE(s.gs.size() == 2);
  CHECK(s.omegas[0] == 0.0);  // sorted ascending
  CHECK(s.gs[0] == 0.1);
  REQUIRE(s.points.size() == 4);
  for (size_t i = 0; i < 4; ++i) {
    CHECK(s.points[i].omega == s.omegas[i / 2]);
    CHECK(s.points[i].g == s.gs[i % 2]);
    CHECK(s.points[i].dm_converged);
  }

  // Warm-started scan values match independent single-point solves to
  // within the duality-gap certificates.
  PhasePointResult solo = phase_point(trap, 0.5, 1.0, o);
  const PhasePointResult& scanned = s.points[3];
  CHECK(std::abs(solo.e_dm - scanned.e_dm) <=
        2.0 * (solo.dm_gap + scanned.dm_gap) + 1e-10);

  CHECK_THROWS_AS(phase_scan(trap, {0.5, 0.5}, {1.0}, o), Error);
  CHECK_THROWS_AS(phase_scan(trap, {0.5}, {}, o), Error);
}

TEST_CASE("channel-gap decay: prediction and monotonicity") {
  TrapSpec trap;  // s = p = 2: exponent -(2/2)(2 + 1 + 1/2) = -3.5
  PhaseOpts o;
  o.resolution = 0.5;
  GapDecayTable t = gap_decay_table(trap, {1.0, 10.0, 100.0}, o);
  CHECK(t.predicted_exponent == doctest::Approx(-3.5).epsilon(1e-12));
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0].g == 1.0);
  CHECK(t.rows[2].g == 100.0);
  CHECK(t.nonincreasing);
  for (const auto& row : t.rows)
    for (double gp : row.gap) CHECK(gp > 0.0);
  // The gaps themselves shrink with coupling.
  for (int k = 0; k < 3; ++k)
    CHECK(t.rows[2].gap[k] < t.rows[0].gap[k]);
}

TEST_CASE("quartic confinement keeps a finite critical speed of infinity") {
  // s = 4 trap: omega_c = infinity, so fast rotation stays subcritical.
  TrapSpec trap;
  trap.s = 4.0;
  PhaseGrids pg = phase_grids(trap, 2.5, 10.0, 1.0);
  CHECK(pg.cyl.nr >= 96);
  CHECK(std::isfinite(pg.mu_estimate));
}
