// Density-matrix minimizer: rank-1 collapse at rest, duality-gap
// certificates, occupation QP, angular-momentum statistics.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "core/channel.hpp"
#include "core/dm.hpp"
#include "core/grid.hpp"
#include "core/util.hpp"

using namespace rotgas;

TEST_CASE("at rest the minimizer is the rank-1 symmetric channel") {
  RadialGrid grid(128, 128, 8.0, 8.0);
  TrapSpec trap;
  DMOpts o;
  DMResult r = dm_minimize(grid, trap, 0.0, 10.0, o);
  REQUIRE(r.converged);
  CHECK(r.rank == 1);
  REQUIRE(r.orbitals.size() >= 1);
  CHECK(r.orbitals[0].n == 0);

  ChannelOpts co;
  ChannelResult c0 = channel_minimize(grid, trap, 0, 10.0, co);
  // Both solve the same convex problem; the duality gaps bound the error.
  CHECK(std::abs(r.energy - c0.energy) <=
        std::max(r.gap, 1e-8 * std::abs(c0.energy)) + 1e-10);
  CHECK(std::abs(r.lz_mean) < 1e-12);
  CHECK(r.lz_var < 1e-12);
}

TEST_CASE("fast rotation: certificates, statistics, and channel spread") {
  // One converged solve in the symmetry-broken regime feeds every check.
  RadialGrid grid(96, 96, 8.0, 8.0);
  TrapSpec trap;
  DMOpts o;
  const double omega = 1.8, g = 50.0;
  DMResult r = dm_minimize(grid, trap, omega, g, o);
  REQUIRE(r.converged);

  // Duality-gap certificate.
  CHECK(r.gap >= -1e-12);
  CHECK(r.gap <= o.gap_tol_rel * std::max(1.0, std::abs(r.energy)));
  CHECK(r.iterations <= o.max_iter);

  // Descent method: the recorded energies never increase.
  REQUIRE(r.hist_energy.size() >= 2);
  for (size_t i = 1; i < r.hist_energy.size(); ++i)
    CHECK(r.hist_energy[i] <= r.hist_energy[i - 1] + 1e-11);
  CHECK(r.hist_energy.back() == doctest::Approx(r.energy).epsilon(1e-12));

  // This fast, strongly coupled point spreads over many channels.
  CHECK(r.rank >= 2);
  CHECK(r.lz_var > 1e-3);

  // Occupations form a probability vector.
  double occ_sum = 0.0;
  for (const auto& orb : r.orbitals) {
    CHECK(orb.occ >= 0.0);
    CHECK(orb.occ <= 1.0 + 1e-12);
    occ_sum += orb.occ;
  }
  CHECK(occ_sum == doctest::Approx(1.0).epsilon(1e-12));

  // Angular-momentum statistics match the occupation list.
  double mean = 0.0, second = 0.0;
  for (const auto& orb : r.orbitals) {
    mean += orb.occ * orb.n;
    second += orb.occ * orb.n * orb.n;
  }
  CHECK(r.lz_mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(r.lz_var == doctest::Approx(second - mean * mean).epsilon(1e-10));

  // Reported energy equals the functional evaluated from scratch.
  Field2 V = potential_table(grid, trap);
  double e = dm_energy(grid, V, omega, g, r.orbitals);
  CHECK(e == doctest::Approx(r.energy).epsilon(1e-11));
}

TEST_CASE("occupation QP satisfies KKT against a brute-force grid") {
  // Three orbitals with a synthetic overlap matrix; scan the simplex on a
  // fine grid and verify the QP result is no worse than every grid point.
  std::vector<double> a = {1.0, 1.2, 1.05};
  std::vector<std::vector<double>> S = {
      {0.50, 0.20, 0.10}, {0.20, 0.40, 0.15}, {0.10, 0.15, 0.45}};
  double g = 2.0;
  auto value = [&](const std::vector<double>& l) {
    double v = 0.0;
    for (int i = 0; i < 3; ++i) {
      v += a[(size_t)i] * l[(size_t)i];
      for (int j = 0; j < 3; ++j)
        v += 4.0 * kPi * g * l[(size_t)i] * S[(size_t)i][(size_t)j] *
             l[(size_t)j];
    }
    return v;
  };
  std::vector<double> best =
      dm_occupations(a, S, g, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  REQUIRE(best.size() == 3);
  double sum = best[0] + best[1] + best[2];
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  double vb = value(best);
  const int K = 200;
  for (int i = 0; i <= K; ++i)
    for (int j = 0; j <= K - i; ++j) {
      std::vector<double> l = {(double)i / K, (double)j / K,
                               (double)(K - i - j) / K};
      CHECK(vb <= value(l) + 1e-9);
    }
}

TEST_CASE("occupation QP with no coupling picks out the smallest entry") {
  std::vector<double> a = {0.7, 0.3, 0.9};
  std::vector<std::vector<double>> S = {
      {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}};
  std::vector<double> l = dm_occupations(a, S, 0.0, {0.3, 0.3, 0.4});
  CHECK(l[1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("linearized ground state agrees with the channel solver") {
  TrapSpec trap;
  RadialGrid g(96, 96, 8.0, 8.0);
  Field2 V = potential_table(g, trap);
  Field2 rho((size_t)g.size(), 0.0);  // zero density: plain spectral problem
  LinearizedGround lg = dm_linearized_ground(g, V, 0.6, 5.0, rho, 4);
  // e_n = 2n + 3 so e_n - 0.6 n is minimized at n = 0.
  CHECK(lg.n == 0);
  CHECK(lg.value == doctest::Approx(3.0).epsilon(2e-3));
}

TEST_CASE("warm starts from a coarser grid converge to the same energy") {
  TrapSpec trap;
  DMOpts o;
  RadialGrid coarse(64, 64, 8.0, 8.0);
  DMResult rc = dm_minimize(coarse, trap, 1.7, 20.0, o);
  REQUIRE(rc.converged);

  // Transfer the orbital list onto the fine grid.
  RadialGrid fine(96, 96, 8.0, 8.0);
  std::vector<DMOrbital> seed = rc.orbitals;
  for (auto& orb : seed) orb.f = regrid(coarse, orb.f, fine);
  DMResult rf = dm_minimize(fine, trap, 1.7, 20.0, o, &seed);
  DMResult cold = dm_minimize(fine, trap, 1.7, 20.0, o);
  REQUIRE(rf.converged);
  REQUIRE(cold.converged);
  CHECK(std::abs(rf.energy - cold.energy) <=
        2.0 * std::max(rf.gap, cold.gap) + 1e-10);
}

TEST_CASE("invalid density-matrix arguments raise configuration errors") {
  TrapSpec trap;
  DMOpts o;
  RadialGrid g(64, 64, 6.0, 6.0);
  CHECK_THROWS_AS(dm_minimize(g, trap, 0.0, 0.0, o), Error);   // g = 0
  CHECK_THROWS_AS(dm_minimize(g, trap, 0.0, -1.0, o), Error);  // g < 0
  CHECK_THROWS_AS(dm_minimize(g, trap, 2.0, 1.0, o), Error);   // supercritical
  DMOpts bad;
  bad.gap_tol_rel = 0.0;
  CHECK_THROWS_AS(dm_minimize(g, trap, 0.0, 1.0, bad), Error);
}
