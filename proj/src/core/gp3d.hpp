#pragma once
// Full 3D Gross-Pitaevskii minimizer over complex fields.
//
//   E[psi] = <psi|(-Lap - Omega Lz + V)|psi> + 4*pi*g * Int |psi|^4,
//
// minimized over unit-norm psi by a preconditioned, backtracking gradient
// flow on the sphere. The functional is non-convex (vortex states), so the
// driver multi-starts from a family of initial fields and returns the
// lowest-energy converged result.

#include <cstdint>
#include <string>
#include <vector>

#include "grid3.hpp"

namespace rotgas {

struct GPOpts {
  double tol = 1e-6;        // residual target relative to max(1, |mu|)
  std::int64_t max_iter = 20000;
  int stencil_order = 4;    // 2 or 4 (kinetic and Lz stencils)
  unsigned multistart = 31; // bitmask: 1 gaussian, 2 offcenter vortex,
                            // 4 m-fold imprints, 8 channel, 16 random
  bool cascade = true;      // minimize on n/2 first, then refine
  int threads = 1;
  std::uint64_t seed = 1234;
};

struct Vortex {
  double x = 0.0;
  double y = 0.0;
  int z_index = 0;
  int winding = 0;
};

struct GPResult {
  CField3 psi;
  double energy = 0.0;
  double mu = 0.0;                // energy + 4 pi g * quartic, exactly
  double quartic = 0.0;           // int |psi|^4
  double residual = 0.0;          // || H0 psi + 8 pi g |psi|^2 psi - mu psi ||
  double lz_mean = 0.0;
  double lz_variance = 0.0;
  std::vector<Vortex> vortices;   // mid-plane slice
  int vortex_skipped = 0;         // low-amplitude plaquettes not classified
  std::string init_label;
  bool converged = false;
  std::int64_t iterations = 0;
};

// Optional channel-state seed for the multistart family: psi(x,y,z) =
// f(r,z) e^{i n phi} interpolated from the cylindrical grid.
struct ChannelSeed {
  const RadialGrid* grid = nullptr;
  const Field2* f = nullptr;
  int n = 0;
};

// (-Lap - Omega Lz + V) psi with the requested stencil order.
void gp_apply_h0(const CartGrid& g, const Field3& V, double omega, int order,
                 const CField3& psi, CField3& out);

// Energy of a normalized field (norm enforced to 1e-6).
double gp_energy(const CartGrid& g, const Field3& V, double omega, double gc,
                 int order, const CField3& psi);

// <Lz> and Var(Lz); variance clamped to >= 0.
void lz_statistics(const CartGrid& g, int order, const CField3& psi,
                   double& mean, double& variance);

// Phase winding summed around each 2x2 plaquette of the z = z_index slice.
// Plaquettes with a corner amplitude below floor_rel * max|psi| are
// skipped; the count of skipped plaquettes is reported.
std::vector<Vortex> detect_vortices(const CartGrid& g, const CField3& psi,
                                    int z_index, double floor_rel,
                                    int* skipped = nullptr);

// One initial field of the multistart family (see GPOpts::multistart).
CField3 gp_initial_field(const CartGrid& g, const Field3& V,
                         const TrapSpec& trap, double gc,
                         const std::string& label, std::uint64_t seed,
                         const ChannelSeed* seed_channel);

// Labels enabled by the mask, in deterministic order.
std::vector<std::string> gp_init_labels(unsigned mask, bool have_channel);

// Full minimization.
GPResult gp_minimize(const CartGrid& g, const TrapSpec& trap, double omega,
                     double gc, const GPOpts& opts,
                     const ChannelSeed* seed_channel = nullptr);

}  // namespace rotgas
