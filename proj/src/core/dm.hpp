#pragma once
// Density-matrix minimizer.
//
// Minimizes  E[gamma] = Tr[(-Lap - Omega Lz + V) gamma] + 4*pi*g * Int rho^2
// over positive, unit-trace operators gamma that commute with Lz.  Such a
// gamma decomposes into angular-momentum channels; within each channel the
// optimal block is rank one, so the state is a finite list of occupied
// orbitals (n_j, occ_j, f_j) with sum occ_j = 1 and rho = sum occ_j f_j^2.
//
// The algorithm is Frank-Wolfe with exact line search plus a corrective
// step: at each iterate the linearized operator H0 + 8*pi*g*rho is solved
// for its ground state across channels (the new "atom"), occupations are
// re-optimized by a simplex-constrained QP, and a rotating subset of
// orbitals is relaxed against the frozen remainder.  Convexity of the
// functional yields a computable duality gap
//   gap = E[gamma] - ( e*(rho) - 4*pi*g * Int rho^2 ) >= 0,
// where e*(rho) is the bottom of the spectrum of H0 + 8*pi*g*rho; the gap
// certifies the distance to the true minimum.

#include <cstdint>
#include <vector>

#include "channel.hpp"
#include "grid.hpp"

namespace rotgas {

struct DMOpts {
  double gap_tol_rel = 1e-5;   // stop when gap <= tol * max(1, |E|)
  std::int64_t max_iter = 500; // Frank-Wolfe iterations
  int n_hi = -1;               // highest channel; -1 = adaptive
  double occ_drop = 1e-10;     // occupations below this are removed
};

struct DMOrbital {
  int n = 0;        // winding number of the channel
  double occ = 0.0; // occupation in [0, 1]
  Field2 f;         // radial profile, normalized to 1
};

struct DMResult {
  std::vector<DMOrbital> orbitals; // sorted by channel
  double energy = 0.0;
  double gap = 0.0; // duality gap at the final iterate (absolute)
  std::int64_t iterations = 0;
  bool converged = false;
  int rank = 0; // occupations above 1e-6
  double lz_mean = 0.0;
  double lz_var = 0.0;
  std::vector<double> hist_energy;
  std::vector<double> hist_gap;
};

// Total density sum occ_j * f_j^2 on the grid.
Field2 dm_density(const RadialGrid& grid, const std::vector<DMOrbital>& orbs);

// E[gamma] evaluated from scratch.
double dm_energy(const RadialGrid& grid, const Field2& V, double omega,
                 double g, const std::vector<DMOrbital>& orbs);

// Occupation QP: minimize a.l + 4*pi*g * l.S.l over the unit simplex.
// a_j = <f_j, H_{n_j} f_j> - Omega*n_j and S_jk = Int f_j^2 f_k^2.
// Projected gradient with a sort-based simplex projection; the returned
// point satisfies the KKT conditions to within kkt_tol.
std::vector<double> dm_occupations(const std::vector<double>& a,
                                   const std::vector<std::vector<double>>& S,
                                   double g, std::vector<double> start,
                                   double kkt_tol = 1e-9);

// Ground state of the linearized operator H0 + 8*pi*g*rho over channels
// 0..n_hi.  Returns the minimizing channel, the eigenvalue including the
// -Omega*n rotation term, and the eigenvector.
struct LinearizedGround {
  int n = 0;
  double value = 0.0; // e_n(rho) - Omega*n, minimized over n
  Field2 f;
};
LinearizedGround dm_linearized_ground(const RadialGrid& grid, const Field2& V,
                                      double omega, double g,
                                      const Field2& rho, int n_hi);

// Full minimization.  warm, when non-null, seeds the orbital list (profiles
// are re-normalized; they may come from a different grid via regrid).
DMResult dm_minimize(const RadialGrid& grid, const TrapSpec& trap,
                     double omega, double g, const DMOpts& opts,
                     const std::vector<DMOrbital>* warm = nullptr);

}  // namespace rotgas
