#pragma once
// Phase-diagram driver: at each (omega, g) it compares the density-matrix
// minimum against the symmetric (single-winding) and full 3D GP minima and
// classifies the point as symmetry-broken when the density-matrix state
// sits strictly below both pure-state minima by more than the tolerance,
// with at least two occupied channels and a certified duality gap.

#include <cstdint>
#include <string>
#include <vector>

#include "channel.hpp"
#include "dm.hpp"
#include "gp3d.hpp"

namespace rotgas {

struct PhaseOpts {
  double tol_abs = 1e-3;  // margin must exceed max(tol_abs, tol_rel*|e_dm|)
  double tol_rel = 1e-4;
  double resolution = 1.0;  // multiplies grid sizes (2 = doubled resolution)
  bool with_3d = true;      // skip the 3D solve (margin uses channel only)
  int n_max = -1;           // channel scan range, -1 = adaptive
  int threads = 1;
  std::uint64_t seed = 1234;
  DMOpts dm;
  ChannelOpts chan;
  GPOpts gp;  // tol/max_iter/multistart honored; grids come from the policy
};

// Tri-state symmetry classification.
enum class XiLabel : int { Outside = 0, Inside = 1, Indeterminate = -1 };

struct PhasePointResult {
  double omega = 0.0;
  double g = 0.0;
  double e_dm = 0.0;
  double dm_gap = 0.0;
  int dm_rank = 0;
  bool dm_converged = false;
  double e_gp_channel = 0.0;  // min_n E_n - omega*n
  int n_star = 0;
  bool channel_bracketed = false;
  double e_gp_3d = 0.0;  // +inf when the 3D solve is disabled
  bool gp_converged = false;
  std::string gp_init;
  double lz_variance = 0.0;  // of the 3D minimizer
  double margin = 0.0;       // min(e_gp_3d, e_gp_channel) - e_dm
  XiLabel in_xi = XiLabel::Indeterminate;
};

struct PhaseScanResult {
  std::vector<double> omegas;  // ascending
  std::vector<double> gs;      // ascending
  std::vector<PhasePointResult> points;  // sorted by (omega, g)
};

// Per-point grid policy: cylindrical and Cartesian grids sized from a
// Thomas-Fermi estimate of the cloud in the rotating frame (chemical
// potential from the effective potential V - omega^2 r^2 / 4, padding of
// max(2, 6 healing lengths), spacing tied to the healing length).
struct PhaseGrids {
  RadialGrid cyl;
  CartGrid cart;
  int stencil_order = 4;
  double mu_estimate = 0.0;
  double r_cloud = 0.0;
  double z_cloud = 0.0;
};
PhaseGrids phase_grids(const TrapSpec& trap, double omega, double g,
                       double resolution);

// One point; warm seeds the DM solve (regridded internally when the grids
// differ).
PhasePointResult phase_point(const TrapSpec& trap, double omega, double g,
                             const PhaseOpts& opts,
                             const std::vector<DMOrbital>* warm = nullptr,
                             const RadialGrid* warm_grid = nullptr,
                             std::vector<DMOrbital>* warm_out = nullptr,
                             RadialGrid* warm_grid_out = nullptr);

// Full scan: ascending g within ascending omega, DM warm-started along g.
// Independent omega columns run in parallel when opts.threads > 1.
PhaseScanResult phase_scan(const TrapSpec& trap, std::vector<double> omegas,
                           std::vector<double> gs, const PhaseOpts& opts);

// Consecutive channel gaps E_{n+1}(g) - E_n(g) for n in {0, 1, 2} along a
// coupling list, plus the predicted large-g decay exponent of the critical
// rotation speed gap, -(2/s)(2 + 2/s + 1/p).
struct GapDecayRow {
  double g = 0.0;
  double gap[3] = {0.0, 0.0, 0.0};
};
struct GapDecayTable {
  std::vector<GapDecayRow> rows;  // ascending g
  double predicted_exponent = 0.0;
  bool nonincreasing = false;  // each gap column nonincreasing along g
};
GapDecayTable gap_decay_table(const TrapSpec& trap, std::vector<double> gs,
                              const PhaseOpts& opts);

}  // namespace rotgas
