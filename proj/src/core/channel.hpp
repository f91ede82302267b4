#pragma once

#include <cstdint>
#include <vector>

#include "solvers.hpp"

namespace rotgas {

struct ChannelOpts {
  double tol = 1e-8;       // residual target relative to |mu_tilde|
  int64_t max_iter = 50000;
};

struct ChannelResult {
  int n = 0;
  double energy = 0.0;    // E_n(g)
  double mu_tilde = 0.0;  // E_n(g) + 4 pi g int f^4
  double residual = 0.0;
  double quartic = 0.0;   // int f^4
  int64_t iterations = 0;
  bool converged = false;
  Field2 orbital;
};

// Minimizer of the winding-n channel functional
//   E_n[f] = int ( |df/dr|^2 + |df/dz|^2 + (n^2/r^2 + V) f^2 + 4 pi g f^4 )
// over unit-norm profiles. g == 0 reduces to the channel eigenproblem.
ChannelResult channel_minimize(const RadialGrid& g, const TrapSpec& trap,
                               int n, double coupling, const ChannelOpts& o,
                               const Field2* warm = nullptr,
                               ChannelPrecond* pre = nullptr);

// Same, with a precomputed potential table (scan/DM internals).
ChannelResult channel_minimize_v(const RadialGrid& g, const Field2& V, int n,
                                 double coupling, const ChannelOpts& o,
                                 const Field2* warm = nullptr,
                                 ChannelPrecond* pre = nullptr);

struct ChannelScan {
  std::vector<ChannelResult> rows;  // n = 0..n_max in order
  bool truncated = false;           // adaptive range hit the hard cap
};

/// Scans n = 0..n_max. n_max < 0 picks the range adaptively for omega:
// stop once E_n - n*omega has increased for three consecutive n and
// mu_tilde_n >= 0.9 * n * critical_omega (the latter only when the
// critical rotation speed is finite).
ChannelScan channel_scan(const RadialGrid& g, const TrapSpec& trap,
                         double coupling, int n_max, double omega,
                         const ChannelOpts& o);

struct BestSymmetric {
  int n = 0;
  double value = 0.0;  // min_n E_n - n*omega
  bool bracketed = false;  // minimum strictly inside the scanned range
};

BestSymmetric best_symmetric(const ChannelScan& s, double omega);

}  // namespace rotgas
