// Channel functional minimization: analytic spectrum, chemical-potential
// identity, Euler-Lagrange residuals, Feynman-Hellmann, scans.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "core/channel.hpp"
#include "core/grid.hpp"
#include "core/util.hpp"

using namespace rotgas;

namespace {
const RadialGrid& test_grid() {
  static RadialGrid g(128, 128, 8.0, 8.0);
  return g;
}
}  // namespace

TEST_CASE("harmonic spectrum: E_n(0) = 2n + 3") {
  TrapSpec trap;
  ChannelOpts o;
  for (int n = 0; n <= 3; ++n) {
    ChannelResult r = channel_minimize(test_grid(), trap, n, 0.0, o);
    CHECK(r.converged);
    CHECK(r.energy ==
          doctest::Approx(2.0 * n + 3.0).epsilon(2e-3));  // O(dr^2) bias
    CHECK(r.mu_tilde == r.energy);  // g = 0: identical stored doubles
  }
}

TEST_CASE("anisotropic harmonic trap: E_0 = 2 sqrt(a) + sqrt(b)") {
  TrapSpec trap;
  trap.radial_coeff = 4.0;  // radial frequency 2
  trap.axial_coeff = 2.25;  // axial frequency 1.5
  ChannelOpts o;
  ChannelResult r = channel_minimize(test_grid(), trap, 0, 0.0, o);
  CHECK(r.converged);
  CHECK(r.energy == doctest::Approx(2.0 * 2.0 + 1.5).epsilon(2e-3));
}

TEST_CASE("chemical potential is the energy plus the quartic term, exactly") {
  TrapSpec trap;
  ChannelOpts o;
  for (double g : {0.5, 10.0, 200.0}) {
    ChannelResult r = channel_minimize(test_grid(), trap, 1, g, o);
    CHECK(r.converged);
    // Identity on the stored doubles, not within a tolerance.
    CHECK(r.mu_tilde == r.energy + 4.0 * kPi * g * r.quartic);
  }
}

TEST_CASE("converged minimizers satisfy the Euler-Lagrange equation") {
  TrapSpec trap;
  ChannelOpts o;
  o.tol = 1e-8;
  for (int n : {0, 2}) {
    ChannelResult r = channel_minimize(test_grid(), trap, n, 25.0, o);
    REQUIRE(r.converged);
    CHECK(r.residual <= o.tol * std::abs(r.mu_tilde));

    // Recompute H f - mu f from scratch as an independent check.
    Field2 V = potential_table(test_grid(), trap);
    Field2 extra((size_t)test_grid().size());
    for (size_t k = 0; k < extra.size(); ++k)
      extra[k] = 8.0 * kPi * 25.0 * r.orbital[k] * r.orbital[k];
    ChannelOp op{&test_grid(), &V, &extra, n};
    Field2 Hf;
    op.apply(r.orbital, Hf);
    double res2 = 0.0;
    for (int i = 0; i < test_grid().nr; ++i)
      for (int j = 0; j < test_grid().nz; ++j) {
        size_t k = (size_t)test_grid().idx(i, j);
        double d = Hf[k] - r.mu_tilde * r.orbital[k];
        res2 += test_grid().weight(i) * d * d;
      }
    CHECK(std::sqrt(res2) <= 2.0 * o.tol * std::abs(r.mu_tilde));
  }
}

TEST_CASE("Feynman-Hellmann: dE/dg = 4 pi int f^4") {
  TrapSpec trap;
  ChannelOpts o;
  const double g0 = 10.0, h = 0.1;
  for (int n : {0, 1}) {
    ChannelResult mid = channel_minimize(test_grid(), trap, n, g0, o);
    ChannelResult lo = channel_minimize(test_grid(), trap, n, g0 - h, o);
    ChannelResult hi = channel_minimize(test_grid(), trap, n, g0 + h, o);
    REQUIRE(mid.converged);
    double fd = (hi.energy - lo.energy) / (2.0 * h);
    double fh = 4.0 * kPi * mid.quartic;
    CHECK(std::abs(fd - fh) <= 1e-3 * std::abs(fh));
  }
}

TEST_CASE("energies are monotone in n and in g") {
  TrapSpec trap;
  ChannelOpts o;
  RadialGrid g(96, 96, 8.0, 8.0);
  double prev = -1.0;
  for (int n = 0; n <= 4; ++n) {
    ChannelResult r = channel_minimize(g, trap, n, 5.0, o);
    CHECK(r.energy > prev);
    prev = r.energy;
  }
  prev = -1.0;
  for (double gc : {0.0, 1.0, 10.0, 100.0}) {
    ChannelResult r = channel_minimize(g, trap, 0, gc, o);
    CHECK(r.energy > prev);
    prev = r.energy;
  }
}

TEST_CASE("warm starts converge in fewer iterations") {
  TrapSpec trap;
  ChannelOpts o;
  RadialGrid g(96, 96, 8.0, 8.0);
  ChannelResult cold = channel_minimize(g, trap, 0, 50.0, o);
  ChannelResult warm = channel_minimize(g, trap, 0, 50.0, o, &cold.orbital);
  CHECK(warm.converged);
  CHECK(warm.iterations < cold.iterations);
  CHECK(warm.energy == doctest::Approx(cold.energy).epsilon(1e-10));
}

TEST_CASE("precomputed-potential entry point matches the trap entry point") {
  TrapSpec trap;
  ChannelOpts o;
  RadialGrid g(64, 64, 7.0, 7.0);
  Field2 V = potential_table(g, trap);
  ChannelResult a = channel_minimize(g, trap, 1, 3.0, o);
  ChannelResult b = channel_minimize_v(g, V, 1, 3.0, o);
  CHECK(a.energy == doctest::Approx(b.energy).epsilon(1e-12));
}

TEST_CASE("channel scan: fixed range, ordering, symmetric best at rest") {
  TrapSpec trap;
  ChannelOpts o;
  RadialGrid g(96, 96, 8.0, 8.0);
  ChannelScan s = channel_scan(g, trap, 2.0, 4, 0.0, o);
  REQUIRE(s.rows.size() == 5);
  for (int n = 0; n <= 4; ++n) CHECK(s.rows[(size_t)n].n == n);

  BestSymmetric b = best_symmetric(s, 0.0);
  CHECK(b.n == 0);
  CHECK(b.bracketed);
  CHECK(b.value == doctest::Approx(s.rows[0].energy));
}

TEST_CASE("channel scan: edge minima are reported as unbracketed") {
  TrapSpec trap;
  ChannelOpts o;
  RadialGrid g(64, 64, 8.0, 8.0);
  ChannelScan s = channel_scan(g, trap, 0.0, 2, 0.0, o);
  // best_symmetric is pure post-processing over the rows, so feeding a rate
  // above every spectral gap (E_{n+1} - E_n = 2 here) pushes the minimum of
  // E_n - n*omega onto the right edge of the scanned range.
  BestSymmetric b = best_symmetric(s, 2.5);
  CHECK(b.n == 2);
  CHECK(!b.bracketed);
}

TEST_CASE("adaptive scan range stops past the symmetric minimum") {
  TrapSpec trap;
  ChannelOpts o;
  RadialGrid g(96, 96, 8.0, 8.0);
  ChannelScan s = channel_scan(g, trap, 1.0, -1, 0.9, o);
  CHECK(!s.truncated);
  BestSymmetric b = best_symmetric(s, 0.9);
  CHECK(b.bracketed);
  CHECK(s.rows.size() >= 4);  // needs slack above the minimizer
}

TEST_CASE("invalid channel arguments raise configuration errors") {
  TrapSpec trap;
  ChannelOpts o;
  RadialGrid g(64, 64, 6.0, 6.0);
  CHECK_THROWS_AS(channel_minimize(g, trap, -1, 1.0, o), Error);
  CHECK_THROWS_AS(channel_minimize(g, trap, 0, -2.0, o), Error);
  ChannelOpts bad;
  bad.tol = 0.0;
  CHECK_THROWS_AS(channel_minimize(g, trap, 0, 1.0, bad), Error);
}
