#include "stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rotgas {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Simpson rule on [a,b] with an even number of panels.
template <class F>
double simpson(F&& f, double a, double b, int panels) {
  if (panels % 2) ++panels;
  const double h = (b - a) / panels;
  double acc = f(a) + f(b);
  for (int i = 1; i < panels; ++i)
    acc += f(a + i * h) * ((i % 2) ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// Truncation point of the axial profile: exp(-z^2/2) - exp(-8) hits zero
// at |z| = 4.
constexpr double kAxialCut = 4.0;

double axial_raw(double z) {
  if (std::abs(z) >= kAxialCut) return 0.0;
  return std::exp(-0.5 * z * z) - std::exp(-8.0);
}

double axial_norm_constant() {
  static const double inv = [] {
    double i2 = simpson([](double z) { double v = axial_raw(z); return v * v; },
                        -kAxialCut, kAxialCut, 4000);
    return 1.0 / std::sqrt(i2);
  }();
  return inv;
}

}  // namespace

double cn_upper_branch(double n) {
  require(std::isfinite(n) && n >= 1.0, 2,
          "cn_upper_branch: defined for n >= 1");
  // sqrt(pi) * Gamma(n + 1/2) / (n * Gamma(n)), in log space.
  double lg = std::lgamma(n + 0.5) - std::lgamma(n) - std::log(n);
  return std::sqrt(kPi) * std::exp(lg);
}

double cn_lower_branch(double n) {
  require(std::isfinite(n) && n > 0.0 && n <= 1.0, 2,
          "cn_lower_branch: defined for 0 < n <= 1");
  // [ 2^{-n} ((2-n)/n)^{n/2} pi csc(n pi/2) / ((2-n) Gamma(n)) ]^{1/n}
  double s = std::sin(0.5 * kPi * n);  // in (0,1] on this branch
  double logc = -n * std::log(2.0) + 0.5 * n * std::log((2.0 - n) / n) +
                std::log(kPi) - std::log(s) - std::log(2.0 - n) -
                std::lgamma(n);
  return std::exp(logc / n);
}

double cn_value(double n) {
  require(std::isfinite(n) && n > 0.0, 2, "cn_value: n must be positive");
  return n >= 1.0 ? cn_upper_branch(n) : cn_lower_branch(n);
}

std::vector<double> j_profile(const RadialGrid& g, const Field2& f) {
  require((int)f.size() == g.size(), 2, "j_profile: field size mismatch");
  std::vector<double> j(g.nr, 0.0);
  for (int i = 0; i < g.nr; ++i) {
    const double* row = f.data() + (size_t)i * g.nz;
    double acc = 0.0;
    for (int jz = 0; jz < g.nz; ++jz) acc += row[jz] * row[jz];
    j[i] = acc * g.dz;
  }
  return j;
}

double shell_gap(const RadialGrid& g, const TrapSpec& trap, double mu_tilde,
                 double R) {
  require(std::isfinite(R) && R >= 0.0, 2, "shell_gap: R must be >= 0");
  double best = kInf;
  bool any = false;
  for (int j = 0; j < g.nz; ++j) {
    if (std::abs(g.z(j)) < R) continue;
    any = true;
    for (int i = 0; i < g.nr; ++i)
      best = std::min(best, trap(g.r(i), g.z(j)) - mu_tilde);
  }
  require(any, 2, "shell_gap: no grid points with |z| >= R");
  return best;
}

double smallest_positive_shell(const RadialGrid& g, const TrapSpec& trap,
                               double mu_tilde) {
  // V is separable and even in z, so it suffices to walk the positive z
  // columns outward; the radial inf always sits at the innermost cell.
  double rad0 = trap(g.r(0), 0.0) - trap(0.0, 0.0);  // radial part at r_0
  for (int j = g.nz / 2; j < g.nz; ++j) {
    double v = rad0 + trap(0.0, g.z(j)) - mu_tilde;
    if (v > 0.0) return std::abs(g.z(j));
  }
  fail(2, "smallest_positive_shell: V - mu_tilde never positive on the grid; "
          "enlarge z_max");
}

LemmaReport lemma_bounds(const RadialGrid& g, const ChannelResult& cres,
                         double coupling, const TrapSpec& trap) {
  (void)trap;
  require(coupling > 0.0, 2, "lemma_bounds: coupling must be positive");
  require((int)cres.orbital.size() == g.size(), 2,
          "lemma_bounds: orbital/grid mismatch");
  LemmaReport rep;
  rep.grid_factor = 1.0 + 5.0 * g.dr;

  double max_f2 = 0.0;
  for (double v : cres.orbital) max_f2 = std::max(max_f2, v * v);
  rep.sup_lhs = max_f2;
  rep.sup_rhs = rep.grid_factor * cres.mu_tilde / (8.0 * kPi * coupling);
  rep.sup_ok = rep.sup_lhs <= rep.sup_rhs;

  std::vector<double> j = j_profile(g, cres.orbital);
  double max_j = 0.0;
  for (double v : j) max_j = std::max(max_j, v);
  rep.sup_j = max_j;

  const int n = cres.n;
  if (max_j <= 0.0) {
    rep.moment_ok = false;
    rep.moment_log_lhs = rep.moment_log_rhs = -kInf;
    return rep;
  }
  double log_lhs = -kInf;
  for (int i = 0; i < g.nr; ++i) {
    if (j[i] <= 0.0) continue;
    log_lhs = std::max(log_lhs, std::log(j[i]) - 2.0 * n * std::log(g.r(i)));
  }
  double log_rhs = std::log(rep.grid_factor) + std::log(max_j);
  if (n > 0) {
    double s2 = 2.0 * cn_value((double)n) * cn_value((double)n) *
                cres.mu_tilde;
    require(s2 > 0.0, 2, "lemma_bounds: nonpositive 2 c_n^2 mu_tilde");
    log_rhs += n * std::log(s2);
  }
  rep.moment_log_lhs = log_lhs;
  rep.moment_log_rhs = log_rhs;
  rep.moment_ok = log_lhs <= log_rhs;
  return rep;
}

double trial_bump(double r) {
  if (r >= 1.0) return 0.0;
  double u = 1.0 - r * r;
  // 2*pi*N^2 * int_0^1 (1-r^2)^4 r dr = 2*pi*N^2/10 = 1.
  static const double N = std::sqrt(5.0 / kPi);
  return N * u * u;
}

double trial_axial(double z) { return axial_norm_constant() * axial_raw(z); }

double TrialShape::value(double r, double z) const {
  return s * trial_bump(s * r) * trial_axial(z / L) / std::sqrt(L);
}

TrialShape trial_shape(double n, double mu_tilde, double L_trial) {
  require(std::isfinite(n) && n >= 1.0, 2, "trial_shape: n must be >= 1");
  require(std::isfinite(mu_tilde) && mu_tilde > 0.0, 2,
          "trial_shape: mu_tilde must be positive");
  require(std::isfinite(L_trial) && L_trial > 0.0, 2,
          "trial_shape: L_trial must be positive");
  double c = cn_value(n);
  TrialShape t;
  t.s = std::sqrt(2.0 * c * c * mu_tilde);
  t.L = L_trial;
  return t;
}

Field2 build_trial(const RadialGrid& g, double n, double mu_tilde,
                   double L_trial) {
  TrialShape t = trial_shape(n, mu_tilde, L_trial);
  // Clamp the dilations to what the grid resolves (at least ~3 cells of
  // radial support, ~2 cells of axial width). Any grid function is an
  // admissible certificate trial, so a clamped shape stays valid; it only
  // deviates from the asymptotically optimal scale, which matters at small
  // n where Q is far from zero anyway.
  t.s = std::min(t.s, 1.0 / (3.0 * g.dr));
  t.L = std::max(t.L, 2.0 * g.dz);
  Field2 w((size_t)g.size(), 0.0);
  for (int i = 0; i < g.nr; ++i) {
    double wr = t.s * trial_bump(t.s * g.r(i));
    if (wr == 0.0) continue;
    double* row = w.data() + (size_t)i * g.nz;
    for (int j = 0; j < g.nz; ++j)
      row[j] = wr * trial_axial(g.z(j) / t.L) / std::sqrt(t.L);
  }
  double nn = norm_w(g, w);
  require(nn > 0.0, 2, "build_trial: trial vanished on the grid");
  for (double& v : w) v /= nn;
  return w;
}

double q_form(const RadialGrid& g, const TrapSpec& trap, double omega,
              double coupling, const ChannelResult& cres, const Field2& w,
              int m) {
  require((int)w.size() == g.size(), 2, "q_form: field size mismatch");
  require((int)cres.orbital.size() == g.size(), 2,
          "q_form: channel orbital/grid mismatch");
  require(m >= 0, 2, "q_form: winding m must be >= 0");
  double nn = dot_w(g, w, w);
  require(nn > 0.0 && std::isfinite(nn), 2, "q_form: zero or non-finite w");

  Field2 V = potential_table(g, trap);
  Field2 extra(w.size());
  for (size_t k = 0; k < extra.size(); ++k)
    extra[k] = 16.0 * kPi * coupling * cres.orbital[k] * cres.orbital[k];
  ChannelOp op{&g, &V, &extra, m};
  double quad = channel_quadratic_form(op, w);

  double q = quad + (cres.n * std::abs(omega) - omega * m - cres.mu_tilde) * nn;
  if (m == cres.n) {
    // Re int conj(phi)^2 w^2: the angular integral selects m == n and the
    // profiles are real.
    Field2 fw(w.size());
    for (size_t k = 0; k < fw.size(); ++k)
      fw[k] = cres.orbital[k] * w[k];
    q += 8.0 * kPi * coupling * dot_w(g, fw, fw);
  }
  return q / nn;
}

bool axial_decay_check(const RadialGrid& g, const TrapSpec& trap,
                       const ChannelResult& cres) {
  double z1;
  try {
    z1 = smallest_positive_shell(g, trap, cres.mu_tilde) + 0.5;
  } catch (const Error&) {
    return true;  // turning surface beyond the grid: nothing to measure
  }
  double z2 = std::min(g.z_max - 2.0 * g.dz, z1 + 2.0);
  if (z2 <= z1 + 2.0 * g.dz) return true;  // no room past the shell

  auto column_max = [&](double z) {
    int j = std::clamp((int)std::floor((z + g.z_max) / g.dz), 0, g.nz - 1);
    int jm = std::clamp(g.nz - 1 - j, 0, g.nz - 1);  // mirrored column
    double best = 0.0;
    for (int i = 0; i < g.nr; ++i) {
      double a = cres.orbital[(size_t)i * g.nz + j];
      double b = cres.orbital[(size_t)i * g.nz + jm];
      best = std::max(best, std::max(a * a, b * b));
    }
    return best;
  };
  double d1 = column_max(z1);
  if (d1 <= 0.0) return true;  // already at underflow: decayed
  double delta = shell_gap(g, trap, cres.mu_tilde, z1);
  double bound = std::exp(-std::sqrt(std::max(0.0, delta)) * (z2 - z1));
  return column_max(z2) / d1 <= 50.0 * bound;
}

InstabilityScan instability_scan(const RadialGrid& g, const TrapSpec& trap,
                                 double omega, double coupling,
                                 const std::vector<int>& n_list,
                                 const std::vector<double>& L_grid,
                                 const ChannelOpts& copts) {
  require(!n_list.empty(), 2, "instability_scan: empty n list");
  require(!L_grid.empty(), 2, "instability_scan: empty L grid");
  for (int n : n_list)
    require(n >= 1, 2, "instability_scan: trial windings need n >= 1");
  for (double L : L_grid)
    require(std::isfinite(L) && L > 0.0, 2,
            "instability_scan: L values must be positive");

  InstabilityScan out;
  out.rows.reserve(n_list.size());
  for (int n : n_list) {
    ChannelResult cres = channel_minimize(g, trap, n, coupling, copts);
    StabilityRow row;
    row.n = n;
    row.e_channel = cres.energy;
    row.mu_tilde = cres.mu_tilde;
    row.c_n = cn_value((double)n);
    row.q_value = kInf;
    row.q_by_L.reserve(L_grid.size());
    for (double L : L_grid) {
      Field2 w = build_trial(g, (double)n, cres.mu_tilde, L);
      double q = q_form(g, trap, omega, coupling, cres, w, 0);
      row.q_by_L.push_back(q);
      if (q < row.q_value) {
        row.q_value = q;
        row.L_trial = L;
      }
    }
    row.unstable = row.q_value < 0.0;
    if (coupling > 0.0) {
      LemmaReport rep = lemma_bounds(g, cres, coupling, trap);
      double cap = cres.mu_tilde / (8.0 * kPi * coupling);
      row.a1_ratio = rep.sup_lhs / cap;
      row.a1_ratio_unsq = std::sqrt(rep.sup_lhs) / cap;
      row.a3_ratio = std::exp(rep.moment_log_lhs -
                              (rep.moment_log_rhs -
                               std::log(rep.grid_factor)));
    }
    row.axial_decay_ok = axial_decay_check(g, trap, cres);
    if (row.unstable && out.first_unstable < 0)
      out.first_unstable = (int)out.rows.size();
    out.rows.push_back(std::move(row));
  }
  return out;
}

double critical_omega_bound(const std::vector<double>& energies, int N) {
  require(N >= 1 && N < (int)energies.size(), 2,
          "critical_omega_bound: need 1 <= N < number of energies");
  double best = -kInf;
  for (int n = 0; n < N; ++n)
    best = std::max(best, (energies[N] - energies[n]) / (double)(N - n));
  return best;
}

}  // namespace rotgas
