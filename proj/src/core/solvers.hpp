#pragma once

#include <cstdint>

#include "grid.hpp"

namespace rotgas {

// Banded-Cholesky preconditioner for a channel operator (optionally with a
// frozen mean-field diagonal). Factors D(H_n + extra + shift)D^{-1}.
struct ChannelPrecond {
  BandChol chol;
  int n = -1;
  double shift = 0.0;
  int age = 0;  // accepted steps since the factorization was built
  bool valid = false;

  void build(const RadialGrid& g, const Field2& V, int n_, const Field2* extra,
             double shift_);
  // Solve (H+shift)^{-1} in field coordinates: y = D^{-1} chol^{-1} D x.
  void apply(const RadialGrid& g, const Field2& x, Field2& y) const;
};

struct EigOut {
  double value = 0.0;
  double residual = 0.0;
  int64_t iterations = 0;
  bool converged = false;
};

// Ground state of H_n + extra (W-self-adjoint) by LOBPCG(1) with the given
// preconditioner (built/refreshed internally when absent or stale).
// f is the warm start if nonempty and receives the eigenvector.
EigOut channel_ground(const RadialGrid& g, const Field2& V, int n,
                      const Field2* extra, double tol_abs, int64_t max_iter,
                      Field2& f, ChannelPrecond* pre);

struct FlowOut {
  double energy = 0.0;     // <f,(H0+extra)f> + 4*pi*g_self * int f^4
  double mu_tilde = 0.0;   // ... + 8*pi*g_self * int f^4
  double residual = 0.0;
  double quartic = 0.0;    // int f^4
  int64_t iterations = 0;
  bool converged = false;
};

// Minimizes E(f) = <f,(H_n + extra)f>_w + 4*pi*g_self * int f^4 over unit
// nonnegative fields by a preconditioned, monotone (backtracked) normalized
// gradient flow. extra is a fixed diagonal (e.g. 8*pi*g*rho_other); g_self
// scales the field's own quartic term (g for a plain channel, g*lambda for
// a density-matrix orbital subproblem). f must hold the start value.
FlowOut channel_flow(const RadialGrid& g, const Field2& V, int n,
                     double g_self, const Field2* extra, double tol_rel,
                     int64_t max_iter, Field2& f, ChannelPrecond* pre);

// Thomas-Fermi profile for the effective potential V + n^2/r^2 at coupling
// g (chemical potential chosen so the mass is 1); falls back to a Gaussian
// times r^n when g is too small for a Thomas-Fermi cloud.
Field2 channel_initial_guess(const RadialGrid& g, const Field2& V, int n,
                             double coupling);

}  // namespace rotgas
