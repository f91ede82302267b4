#pragma once
// Second-variation stability machinery for symmetric (single-winding)
// states, plus the special constants and lemma-style bound checks used by
// the instability argument.
//
// The quadratic form at the stationary channel state phi = f_n e^{i n phi}
// evaluated on a perturbation w of winding m is
//   Q(w) = <w| -Lap_r - d^2/dz^2 + m^2/r^2 + V - Omega m
//             + 16 pi g f_n^2 - mu_n + n |Omega| |w>
//          + [m == n] * 8 pi g * Int f_n^2 w^2,
// and Q < 0 certifies instability of the channel state.

#include <cstdint>
#include <vector>

#include "channel.hpp"

namespace rotgas {

// The constant c_n of the axial-decay machinery:
//   n >= 1 : sqrt(pi) * Gamma(n + 1/2) / (n * Gamma(n))
//   0 < n <= 1 : ( 2^{-n} ((2-n)/n)^{n/2} * pi * csc(n pi / 2)
//                  / ((2-n) Gamma(n)) )^{1/n}
// Both branches agree at n = 1 (= pi/2).
double cn_value(double n);
double cn_upper_branch(double n);  // n >= 1
double cn_lower_branch(double n);  // 0 < n <= 1

// j(r_i) = Int f(r_i, z)^2 dz (z-quadrature of the squared profile).
std::vector<double> j_profile(const RadialGrid& g, const Field2& f);

// inf over grid points with |z| >= R of V - mu_tilde; positive once R is
// past the classical turning surface.
double shell_gap(const RadialGrid& g, const TrapSpec& trap, double mu_tilde,
                 double R);
// Smallest grid |z| value for which shell_gap is positive.
double smallest_positive_shell(const RadialGrid& g, const TrapSpec& trap,
                               double mu_tilde);

// Pointwise bound checks on a converged channel minimizer, with the grid
// tolerance factor (1 + 5 dr):
//   (A1') max f^2 <= mu_tilde / (8 pi g)
//   (A3)  max_r r^{-2n} j(r) <= (2 c_n^2 mu_tilde)^n * max_r j(r)
// A3 is evaluated in log space (r^{-2n} overflows otherwise). The axial
// bound of the intermediate lemma has an unspecified constant, so only
// sup j is reported for it, without a verdict.
struct LemmaReport {
  double grid_factor = 0.0;  // 1 + 5 dr
  bool sup_ok = false;       // A1'
  double sup_lhs = 0.0;      // max f^2
  double sup_rhs = 0.0;      // (1 + 5 dr) * mu_tilde / (8 pi g)
  bool moment_ok = false;    // A3
  double moment_log_lhs = 0.0;  // log max r^{-2n} j
  double moment_log_rhs = 0.0;  // log [(1+5dr) (2 c_n^2 mu)^n max j]
  double sup_j = 0.0;        // qualitative axial report
};
LemmaReport lemma_bounds(const RadialGrid& g, const ChannelResult& cres,
                         double coupling, const TrapSpec& trap);

// Analytic trial profile w(r, z) = s * w1(s r) * v(z / L) / sqrt(L) with
// s = sqrt(2 c_n^2 mu_tilde): w1 is the unit-norm 2D bump ~ (1 - r^2)^2
// supported in the unit disk, v a unit-norm truncated Gaussian.
double trial_bump(double r);      // w1, unit 2D norm
double trial_axial(double z);     // v, unit 1D norm
struct TrialShape {
  double s = 0.0;
  double L = 1.0;
  double value(double r, double z) const;
};
TrialShape trial_shape(double n, double mu_tilde, double L_trial);

// Materialization on the grid (normalized in the grid quadrature). The
// dilations are clamped to grid-resolvable scales (s <= 1/(3 dr),
// L >= 2 dz); a clamped trial is still an admissible certificate.
Field2 build_trial(const RadialGrid& g, double n, double mu_tilde,
                   double L_trial);

// Q(w) for a unit-norm grid field w of winding m (formula above).
double q_form(const RadialGrid& g, const TrapSpec& trap, double omega,
              double coupling, const ChannelResult& cres, const Field2& w,
              int m);

// Qualitative WKB check: past the classical turning surface the column
// maxima d(z) = max_r f^2 must decay at least like exp(-sqrt(delta) dz),
// up to a generous prefactor. Vacuously true when the grid has no room
// beyond the turning surface.
bool axial_decay_check(const RadialGrid& g, const TrapSpec& trap,
                       const ChannelResult& cres);

struct StabilityRow {
  int n = 0;
  double e_channel = 0.0;  // E_n(g)
  double mu_tilde = 0.0;
  double c_n = 0.0;
  double L_trial = 1.0;   // argmin over the L grid
  double q_value = 0.0;   // min over the L grid
  bool unstable = false;  // q_value < 0
  double a1_ratio = 0.0;       // max f^2 / (mu_tilde/(8 pi g))
  double a1_ratio_unsq = 0.0;  // max f / (mu_tilde/(8 pi g)), reported only
  double a3_ratio = 0.0;       // max r^-2n j / ((2 c_n^2 mu)^n max j)
  bool axial_decay_ok = false;
  std::vector<double> q_by_L;  // Q at every L of the scan grid, in order
};

struct InstabilityScan {
  std::vector<StabilityRow> rows;
  int first_unstable = -1;  // index into rows, -1 if none
};

// For each n in n_list: solve the channel, build the trial for each L in
// L_grid (winding m = 0), minimize Q over L.
InstabilityScan instability_scan(const RadialGrid& g, const TrapSpec& trap,
                                 double omega, double coupling,
                                 const std::vector<int>& n_list,
                                 const std::vector<double>& L_grid,
                                 const ChannelOpts& copts);

// max over 0 <= n < N of (E_N - E_n)/(N - n); rotation speeds above this
// exclude every channel below N from being the symmetric minimizer.
double critical_omega_bound(const std::vector<double>& energies, int N);

}  // namespace rotgas
