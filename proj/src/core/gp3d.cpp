#include "gp3d.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <mutex>
#include <sstream>

#include "util.hpp"

namespace rotgas {

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex mu;
  return mu;
}

// ---------------------------------------------------------------------
// Stencil application: out = (-Lap + V) psi + i*Omega*(x Dy - y Dx) psi.
// All stencil weights depend on the offset only (zero Dirichlet extension
// for out-of-range neighbours), which keeps the matrix Hermitian even at
// the truncated wide-stencil rows next to the boundary.
// ---------------------------------------------------------------------
void apply_h0_impl(const CartGrid& g, const Field3& V, double omega,
                   int order, const CField3& psi, CField3& out) {
  require(order == 2 || order == 4, 2, "gp3d: stencil order must be 2 or 4");
  out.resize(psi.size());
  const int n = g.n;
  const long sx = (long)n * n, sy = n, sz = 1;
  const double ih2 = 1.0 / (g.h * g.h);
  const double ih1 = 1.0 / g.h;

  // -Lap weights: diag, first and second neighbour (per axis).
  const double ld = (order == 2) ? 2.0 * ih2 : 30.0 / 12.0 * ih2;
  const double l1 = (order == 2) ? -1.0 * ih2 : -16.0 / 12.0 * ih2;
  const double l2 = (order == 2) ? 0.0 : 1.0 / 12.0 * ih2;
  // First-derivative weights (antisymmetric): f' ~ d1*(p+1 - p-1) + d2*(p+2 - p-2).
  const double d1 = (order == 2) ? 0.5 * ih1 : 8.0 / 12.0 * ih1;
  const double d2 = (order == 2) ? 0.0 : -1.0 / 12.0 * ih1;

  const Cplx iom(0.0, omega);
  const Cplx* p = psi.data();
  Cplx* o = out.data();

  for (int i = 0; i < n; ++i) {
    const double x = g.coord(i);
    for (int j = 0; j < n; ++j) {
      const double y = g.coord(j);
      const long base = (long)i * sx + (long)j * sy;
      const double* vr = V.data() + base;
      const Cplx* row = p + base;
      Cplx* orow = o + base;
      const bool xm1 = i >= 1, xp1 = i + 1 < n, xm2 = i >= 2, xp2 = i + 2 < n;
      const bool ym1 = j >= 1, yp1 = j + 1 < n, ym2 = j >= 2, yp2 = j + 2 < n;
      for (int k = 0; k < n; ++k) {
        const Cplx c = row[k];
        Cplx lap = 3.0 * ld * c;
        Cplx dx(0.0, 0.0), dy(0.0, 0.0);
        if (xm1) {
          lap += l1 * row[k - sx];
          dx -= d1 * row[k - sx];
        }
        if (xp1) {
          lap += l1 * row[k + sx];
          dx += d1 * row[k + sx];
        }
        if (ym1) {
          lap += l1 * row[k - sy];
          dy -= d1 * row[k - sy];
        }
        if (yp1) {
          lap += l1 * row[k + sy];
          dy += d1 * row[k + sy];
        }
        if (k >= 1) lap += l1 * row[k - sz];
        if (k + 1 < n) lap += l1 * row[k + sz];
        if (order == 4) {
          if (xm2) {
            lap += l2 * row[k - 2 * sx];
            dx -= d2 * row[k - 2 * sx];
          }
          if (xp2) {
            lap += l2 * row[k + 2 * sx];
            dx += d2 * row[k + 2 * sx];
          }
          if (ym2) {
            lap += l2 * row[k - 2 * sy];
            dy -= d2 * row[k - 2 * sy];
          }
          if (yp2) {
            lap += l2 * row[k + 2 * sy];
            dy += d2 * row[k + 2 * sy];
          }
          if (k >= 2) lap += l2 * row[k - 2 * sz];
          if (k + 2 < n) lap += l2 * row[k + 2 * sz];
        }
        // -Omega*Lz = +i*Omega*(x d/dy - y d/dx)
        orow[k] = lap + vr[k] * c + iom * (x * dy - y * dx);
      }
    }
  }
}

// Lz psi = -i (x Dy - y Dx) psi.
void apply_lz(const CartGrid& g, int order, const CField3& psi, CField3& out) {
  out.assign(psi.size(), Cplx(0.0, 0.0));
  const int n = g.n;
  const long sx = (long)n * n, sy = n;
  const double ih1 = 1.0 / g.h;
  const double d1 = (order == 2) ? 0.5 * ih1 : 8.0 / 12.0 * ih1;
  const double d2 = (order == 2) ? 0.0 : -1.0 / 12.0 * ih1;
  const Cplx mi(0.0, -1.0);
  for (int i = 0; i < n; ++i) {
    const double x = g.coord(i);
    for (int j = 0; j < n; ++j) {
      const double y = g.coord(j);
      const long base = (long)i * sx + (long)j * sy;
      const Cplx* row = psi.data() + base;
      Cplx* orow = out.data() + base;
      for (int k = 0; k < n; ++k) {
        Cplx dx(0.0, 0.0), dy(0.0, 0.0);
        if (i >= 1) dx -= d1 * row[k - sx];
        if (i + 1 < n) dx += d1 * row[k + sx];
        if (j >= 1) dy -= d1 * row[k - sy];
        if (j + 1 < n) dy += d1 * row[k + sy];
        if (order == 4) {
          if (i >= 2) dx -= d2 * row[k - 2 * sx];
          if (i + 2 < n) dx += d2 * row[k + 2 * sx];
          if (j >= 2) dy -= d2 * row[k - 2 * sy];
          if (j + 2 < n) dy += d2 * row[k + 2 * sy];
        }
        orow[k] = mi * (x * dy - y * dx);
      }
    }
  }
}

// ---------------------------------------------------------------------
// Spectral preconditioner: (alpha - Lap)^{-1} in the sine basis, which
// diagonalizes the second-order Dirichlet Laplacian exactly and the
// truncated fourth-order one up to boundary rows (plenty for a
// preconditioner). Implemented with FFTW RODFT00 (DST-I), which is its
// own inverse up to the factor 2(n+1) per axis.
// ---------------------------------------------------------------------
struct SpectralPrecond {
  int n = 0;
  std::vector<double> lam;   // 1D -Lap eigenvalues per sine mode
  std::vector<double> buf;
  fftw_plan plan = nullptr;
  double scale = 1.0;

  SpectralPrecond(const CartGrid& g, int order) : n(g.n) {
    lam.resize(n);
    const double ih2 = 1.0 / (g.h * g.h);
    for (int k = 0; k < n; ++k) {
      const double th = kPi * (k + 1) / (n + 1);
      lam[k] = (order == 2)
                   ? (2.0 - 2.0 * std::cos(th)) * ih2
                   : (30.0 - 32.0 * std::cos(th) + 2.0 * std::cos(2.0 * th)) *
                         ih2 / 12.0;
    }
    buf.assign((size_t)n * n * n, 0.0);
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_r2r_3d(n, n, n, buf.data(), buf.data(), FFTW_RODFT00,
                            FFTW_RODFT00, FFTW_RODFT00, FFTW_ESTIMATE);
    require(plan != nullptr, 5, "gp3d: FFTW plan creation failed");
    const double per_axis = 2.0 * (n + 1);
    scale = 1.0 / (per_axis * per_axis * per_axis);
  }
  SpectralPrecond(const SpectralPrecond&) = delete;
  SpectralPrecond& operator=(const SpectralPrecond&) = delete;
  ~SpectralPrecond() {
    if (plan) {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      fftw_destroy_plan(plan);
    }
  }

  void component(double alpha, const CField3& r, CField3& out, bool imag) {
    const size_t sz = buf.size();
    for (size_t t = 0; t < sz; ++t)
      buf[t] = imag ? r[t].imag() : r[t].real();
    fftw_execute(plan);
    size_t t = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double lij = alpha + lam[i] + lam[j];
        for (int k = 0; k < n; ++k, ++t) buf[t] /= (lij + lam[k]);
      }
    fftw_execute(plan);
    if (imag)
      for (size_t q = 0; q < sz; ++q)
        out[q] = Cplx(out[q].real(), buf[q] * scale);
    else
      for (size_t q = 0; q < sz; ++q)
        out[q] = Cplx(buf[q] * scale, out[q].imag());
  }

  void apply(double alpha, const CField3& r, CField3& out) {
    out.resize(r.size());
    component(alpha, r, out, false);
    component(alpha, r, out, true);
  }
};

double re_cdot(const CartGrid& g, const CField3& a, const CField3& b) {
  return cdot3(g, a, b).real();
}

struct FlowOut3 {
  double energy = 0.0;
  double mu = 0.0;
  double residual = 0.0;
  double quartic = 0.0;
  std::int64_t iterations = 0;
  bool converged = false;
};

// Preconditioned monotone gradient flow on the unit sphere.
FlowOut3 flow3(const CartGrid& g, const Field3& V, double omega, double gc,
               int order, double tol, std::int64_t max_iter, CField3& psi) {
  normalize3(g, psi);
  SpectralPrecond prec(g, order);

  CField3 hpsi, res, dir, hdir, pr;
  const double w = g.weight();
  const long N = g.size();

  apply_h0_impl(g, V, omega, order, psi, hpsi);
  double qpp = re_cdot(g, psi, hpsi);
  double q4 = quartic3(g, psi);

  FlowOut3 out;
  double tau = 0.1;
  double beta = 0.0;  // momentum weight, re-armed after a clean step
  std::vector<double> ehist;

  for (std::int64_t it = 1; it <= max_iter; ++it) {
    const double energy = qpp + 4.0 * kPi * gc * q4;
    const double mu = energy + 4.0 * kPi * gc * q4;
    ehist.push_back(energy);

    // Residual of the stationarity equation.
    res.resize(psi.size());
    double rn2 = 0.0;
    const double c8 = 8.0 * kPi * gc;
    for (long t = 0; t < N; ++t) {
      Cplx r = hpsi[t] + (c8 * std::norm(psi[t]) - mu) * psi[t];
      res[t] = r;
      rn2 += std::norm(r);
    }
    const double rnorm = std::sqrt(rn2 * w);
    out.energy = energy;
    out.mu = mu;
    out.residual = rnorm;
    out.quartic = q4;
    out.iterations = it;
    if (rnorm <= tol * std::max(1.0, std::abs(mu))) {
      out.converged = true;
      break;
    }
    // Plateau stop: relative energy change below 1e-12 over 100 steps.
    if (ehist.size() > 100) {
      double past = ehist[ehist.size() - 101];
      if (past - energy <= 1e-12 * std::max(1.0, std::abs(energy))) break;
    }

    const double alpha = std::max(1.0, 1.5 * std::abs(mu));
    prec.apply(alpha, res, pr);

    // Momentum direction with slope safeguard.
    double slope;
    if (beta > 0.0 && dir.size() == psi.size()) {
      for (long t = 0; t < N; ++t) dir[t] = pr[t] + beta * dir[t];
      slope = 2.0 * re_cdot(g, res, dir);
      if (!(slope > 0.0)) {
        dir = pr;
        slope = 2.0 * re_cdot(g, res, pr);
      }
    } else {
      dir = pr;
      slope = 2.0 * re_cdot(g, res, pr);
    }

    apply_h0_impl(g, V, omega, order, dir, hdir);
    const double qdd = re_cdot(g, dir, hdir);
    const double qpd = re_cdot(g, dir, hpsi);
    const double spd = re_cdot(g, psi, dir);
    const double sdd = re_cdot(g, dir, dir);

    auto energy_at = [&](double t) {
      // E((psi - t d)/||.||) from cached quadratic pieces + one pass for
      // the quartic term.
      const double q = qpp - 2.0 * t * qpd + t * t * qdd;
      const double s = 1.0 - 2.0 * t * spd + t * t * sdd;
      double quart = 0.0;
      for (long u = 0; u < N; ++u) {
        const double m = std::norm(psi[u] - t * dir[u]);
        quart += m * m;
      }
      quart *= w;
      return std::make_pair(q / s + 4.0 * kPi * gc * quart / (s * s), s);
    };

    double t = std::min(1.0, 1.4 * tau);
    bool ok = false;
    double snorm = 1.0;
    for (int bt = 0; bt < 40; ++bt) {
      auto [ecand, s] = energy_at(t);
      if (s > 0.1 &&
          ecand <= energy - 1e-4 * t * slope +
                       1e-13 * std::max(1.0, std::abs(energy))) {
        ok = true;
        snorm = std::sqrt(s);
        break;
      }
      t *= 0.5;
    }
    if (!ok) {
      if (beta > 0.0) {  // drop momentum and let the next pass retry
        beta = 0.0;
        continue;
      }
      break;  // true stall at the bare preconditioned gradient
    }
    tau = t;
    beta = 0.85;
    const double inv = 1.0 / snorm;
    for (long u = 0; u < N; ++u) psi[u] = (psi[u] - t * dir[u]) * inv;
    apply_h0_impl(g, V, omega, order, psi, hpsi);
    qpp = re_cdot(g, psi, hpsi);
    q4 = quartic3(g, psi);
  }
  if (!out.converged) {
    // Refresh the outputs at the final iterate.
    const double energy = qpp + 4.0 * kPi * gc * q4;
    const double mu = energy + 4.0 * kPi * gc * q4;
    double rn2 = 0.0;
    const double c8 = 8.0 * kPi * gc;
    for (long t = 0; t < N; ++t) {
      Cplx r = hpsi[t] + (c8 * std::norm(psi[t]) - mu) * psi[t];
      rn2 += std::norm(r);
    }
    out.energy = energy;
    out.mu = mu;
    out.quartic = q4;
    out.residual = std::sqrt(rn2 * w);
    out.converged = out.residual <= tol * std::max(1.0, std::abs(mu));
  }
  return out;
}

// Thomas-Fermi chemical potential on the grid: mass(mu) = 1.
double tf_mu(const CartGrid& g, const Field3& V, double gc) {
  double vmin = V[0];
  for (double v : V) vmin = std::min(vmin, v);
  auto mass = [&](double mu) {
    double s = 0.0;
    for (double v : V) s += std::max(0.0, mu - v);
    return s * g.weight() / (8.0 * kPi * gc);
  };
  double lo = vmin, hi = vmin + 1.0;
  while (mass(hi) < 1.0 && hi < vmin + 1e6) hi = vmin + 2.0 * (hi - vmin);
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (mass(mid) < 1.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

void gp_apply_h0(const CartGrid& g, const Field3& V, double omega, int order,
                 const CField3& psi, CField3& out) {
  require((long)psi.size() == g.size(), 2, "gp3d: field size mismatch");
  require((long)V.size() == g.size(), 2, "gp3d: potential size mismatch");
  apply_h0_impl(g, V, omega, order, psi, out);
}

double gp_energy(const CartGrid& g, const Field3& V, double omega, double gc,
                 int order, const CField3& psi) {
  require((long)psi.size() == g.size(), 2, "gp3d: field size mismatch");
  const double nn = norm3(g, psi);
  require(std::abs(nn - 1.0) <= 1e-6, 2,
          "gp3d: energy of an unnormalized field");
  CField3 hpsi;
  apply_h0_impl(g, V, omega, order, psi, hpsi);
  const Cplx q = cdot3(g, psi, hpsi);
  require(std::abs(q.imag()) <= 1e-10 * std::max(1.0, std::abs(q.real())), 5,
          "gp3d: quadratic form is not real (operator asymmetry)");
  return q.real() + 4.0 * kPi * gc * quartic3(g, psi);
}

void lz_statistics(const CartGrid& g, int order, const CField3& psi,
                   double& mean, double& variance) {
  CField3 lpsi;
  apply_lz(g, order, psi, lpsi);
  const Cplx m = cdot3(g, psi, lpsi);
  mean = m.real();
  const double m2 = re_cdot(g, lpsi, lpsi);
  variance = std::max(0.0, m2 - mean * mean);
}

std::vector<Vortex> detect_vortices(const CartGrid& g, const CField3& psi,
                                    int z_index, double floor_rel,
                                    int* skipped) {
  require(z_index >= 0 && z_index < g.n, 2, "gp3d: slice index out of range");
  double amax = 0.0;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j)
      amax = std::max(amax, std::abs(psi[g.idx(i, j, z_index)]));
  const double floor = floor_rel * amax;
  int skip = 0;
  std::vector<Vortex> out;
  auto wrap = [](double d) {
    while (d > kPi) d -= 2.0 * kPi;
    while (d <= -kPi) d += 2.0 * kPi;
    return d;
  };
  for (int i = 0; i + 1 < g.n; ++i) {
    for (int j = 0; j + 1 < g.n; ++j) {
      const Cplx c0 = psi[g.idx(i, j, z_index)];
      const Cplx c1 = psi[g.idx(i + 1, j, z_index)];
      const Cplx c2 = psi[g.idx(i + 1, j + 1, z_index)];
      const Cplx c3 = psi[g.idx(i, j + 1, z_index)];
      if (std::abs(c0) < floor || std::abs(c1) < floor ||
          std::abs(c2) < floor || std::abs(c3) < floor) {
        ++skip;
        continue;
      }
      double s = wrap(std::arg(c1) - std::arg(c0)) +
                 wrap(std::arg(c2) - std::arg(c1)) +
                 wrap(std::arg(c3) - std::arg(c2)) +
                 wrap(std::arg(c0) - std::arg(c3));
      int wind = (int)std::lround(s / (2.0 * kPi));
      if (wind != 0)
        out.push_back(Vortex{g.coord(i) + 0.5 * g.h, g.coord(j) + 0.5 * g.h,
                             z_index, wind});
    }
  }
  if (skipped) *skipped = skip;
  return out;
}

std::vector<std::string> gp_init_labels(unsigned mask, bool have_channel) {
  std::vector<std::string> labels;
  if (mask & 1u) labels.push_back("gaussian");
  if (mask & 2u) labels.push_back("offcenter");
  if (mask & 4u)
    for (int m = 1; m <= 4; ++m) labels.push_back("mfold" + std::to_string(m));
  if ((mask & 8u) && have_channel) labels.push_back("channel");
  if (mask & 16u) labels.push_back("random");
  return labels;
}

CField3 gp_initial_field(const CartGrid& g, const Field3& V,
                         const TrapSpec& trap, double gc,
                         const std::string& label, std::uint64_t seed,
                         const ChannelSeed* seed_channel) {
  (void)trap;
  CField3 psi(g.size(), Cplx(0.0, 0.0));

  // Reference radius of the cloud (Thomas-Fermi when interacting).
  double rref = 2.0;
  Field3 amp;  // non-negative amplitude profile
  if (gc >= 0.5) {
    const double mu = tf_mu(g, V, gc);
    amp.resize(g.size());
    for (long t = 0; t < g.size(); ++t)
      amp[t] = std::sqrt(std::max(0.0, mu - V[t]) / (8.0 * kPi * gc));
    // Largest in-plane radius where the profile is positive.
    const int kz = g.n / 2;
    double r2max = 0.0;
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j)
        if (amp[g.idx(i, j, kz)] > 0.0)
          r2max = std::max(
              r2max, g.coord(i) * g.coord(i) + g.coord(j) * g.coord(j));
    rref = std::max(1.0, std::sqrt(r2max));
  } else {
    amp.resize(g.size());
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j)
        for (int k = 0; k < g.n; ++k) {
          const double x = g.coord(i), y = g.coord(j), z = g.coord(k);
          amp[g.idx(i, j, k)] = std::exp(-0.5 * (x * x + y * y + z * z));
        }
  }

  auto imprint = [&](const std::vector<std::pair<double, double>>& centers) {
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j) {
        const double x = g.coord(i), y = g.coord(j);
        double phase = 0.0;
        for (auto [cx, cy] : centers) phase += std::atan2(y - cy, x - cx);
        const Cplx ph(std::cos(phase), std::sin(phase));
        for (int k = 0; k < g.n; ++k) {
          const long t = g.idx(i, j, k);
          psi[t] = amp[t] * ph;
        }
      }
  };

  if (label == "gaussian") {
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j)
        for (int k = 0; k < g.n; ++k) {
          const double x = g.coord(i), y = g.coord(j), z = g.coord(k);
          psi[g.idx(i, j, k)] = std::exp(-0.5 * (x * x + y * y + z * z));
        }
  } else if (label == "offcenter") {
    imprint({{0.35 * rref, 0.0}});
  } else if (label.rfind("mfold", 0) == 0) {
    const int m = std::stoi(label.substr(5));
    std::vector<std::pair<double, double>> centers;
    if (m == 1) {
      centers.push_back({0.0, 0.0});
    } else {
      const double d = 0.4 * rref;
      for (int q = 0; q < m; ++q) {
        const double th = 2.0 * kPi * q / m;
        centers.push_back({d * std::cos(th), d * std::sin(th)});
      }
    }
    imprint(centers);
  } else if (label == "channel") {
    require(seed_channel && seed_channel->grid && seed_channel->f, 2,
            "gp3d: channel init requested without a channel seed");
    const RadialGrid& rg = *seed_channel->grid;
    const Field2& f = *seed_channel->f;
    const int wn = seed_channel->n;
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j) {
        const double x = g.coord(i), y = g.coord(j);
        const double r = std::sqrt(x * x + y * y);
        const double phi = std::atan2(y, x);
        const Cplx ph(std::cos(wn * phi), std::sin(wn * phi));
        for (int k = 0; k < g.n; ++k) {
          const double z = g.coord(k);
          // Bilinear sample of f(r, z) with even reflection at the axis.
          double fr = (r / rg.dr) - 0.5;
          double fz = (z + rg.z_max) / rg.dz - 0.5;
          int ir = (int)std::floor(fr), iz = (int)std::floor(fz);
          double tr = fr - ir, tz = fz - iz;
          double val = 0.0;
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
              int rr = ir + a, zz = iz + b;
              if (rr < 0) rr = -rr - 1;  // even reflection across r = 0
              if (rr >= rg.nr || zz < 0 || zz >= rg.nz) continue;
              val += (a ? tr : 1.0 - tr) * (b ? tz : 1.0 - tz) *
                     f[rg.idx(rr, zz)];
            }
          psi[g.idx(i, j, k)] = val * ph;
        }
      }
  } else if (label == "random") {
    Rng rng = Rng(seed).fork(0x3d3d3d);
    const double sig = g.half / 2.5;
    for (long t = 0; t < g.size(); ++t)
      psi[t] = Cplx(rng.normal(), rng.normal());
    // A few nearest-neighbour smoothing passes kill the grid-scale noise.
    CField3 tmp(psi.size());
    for (int pass = 0; pass < 6; ++pass) {
      for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
          for (int k = 0; k < g.n; ++k) {
            Cplx s = psi[g.idx(i, j, k)];
            double cnt = 1.0;
            if (i > 0) s += psi[g.idx(i - 1, j, k)], cnt += 1.0;
            if (i + 1 < g.n) s += psi[g.idx(i + 1, j, k)], cnt += 1.0;
            if (j > 0) s += psi[g.idx(i, j - 1, k)], cnt += 1.0;
            if (j + 1 < g.n) s += psi[g.idx(i, j + 1, k)], cnt += 1.0;
            if (k > 0) s += psi[g.idx(i, j, k - 1)], cnt += 1.0;
            if (k + 1 < g.n) s += psi[g.idx(i, j, k + 1)], cnt += 1.0;
            tmp[g.idx(i, j, k)] = s / cnt;
          }
      std::swap(psi, tmp);
    }
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j)
        for (int k = 0; k < g.n; ++k) {
          const double x = g.coord(i), y = g.coord(j), z = g.coord(k);
          psi[g.idx(i, j, k)] *=
              std::exp(-0.5 * (x * x + y * y + z * z) / (sig * sig));
        }
  } else {
    fail(2, "gp3d: unknown init label '" + label + "'");
  }
  normalize3(g, psi);
  return psi;
}

GPResult gp_minimize(const CartGrid& g, const TrapSpec& trap, double omega,
                     double gc, const GPOpts& opts,
                     const ChannelSeed* seed_channel) {
  trap.validate();
  require(gc >= 0.0, 2, "gp3d: coupling must be >= 0");
  require(std::abs(omega) < trap.critical_omega() - 1e-12, 2,
          "gp3d: |omega| must stay below the critical rotation speed");
  require(opts.stencil_order == 2 || opts.stencil_order == 4, 2,
          "gp3d: stencil order must be 2 or 4");
  require(opts.max_iter >= 1, 2, "gp3d: max_iter must be >= 1");
  require(opts.tol > 0.0, 2, "gp3d: tol must be > 0");

  const std::vector<std::string> labels =
      gp_init_labels(opts.multistart, seed_channel != nullptr);
  require(!labels.empty(), 2, "gp3d: empty multistart selection");

  const Field3 V = potential_table3(g, trap);
  const int order = opts.stencil_order;

  struct Candidate {
    std::string label;
    CField3 psi;
    FlowOut3 flow;
  };

  // Stage 1: rank the starting basins (coarse grid when cascading).
  const bool cascade = opts.cascade && g.n >= 32;
  const CartGrid cg = cascade ? CartGrid(g.n / 2, g.half) : g;
  const Field3 cV = cascade ? potential_table3(cg, trap) : V;
  const double ctol = cascade ? std::max(opts.tol, 1e-4) : opts.tol;
  const std::int64_t citer =
      cascade ? std::max<std::int64_t>(200, opts.max_iter / 2) : opts.max_iter;

  std::vector<Candidate> cands(labels.size());
  parallel_for((std::int64_t)labels.size(), opts.threads, [&](std::int64_t t) {
    Candidate& c = cands[(size_t)t];
    c.label = labels[(size_t)t];
    c.psi = gp_initial_field(cg, cV, trap, gc, c.label, opts.seed,
                             seed_channel);
    c.flow = flow3(cg, cV, omega, gc, order, ctol, citer, c.psi);
  });

  std::vector<size_t> rank(cands.size());
  for (size_t i = 0; i < rank.size(); ++i) rank[i] = i;
  std::sort(rank.begin(), rank.end(), [&](size_t a, size_t b) {
    if (cands[a].flow.energy != cands[b].flow.energy)
      return cands[a].flow.energy < cands[b].flow.energy;
    return cands[a].label < cands[b].label;
  });

  GPResult out;
  bool have = false;
  if (!cascade) {
    for (size_t i : rank) {
      if (!cands[i].flow.converged) continue;
      out.psi = std::move(cands[i].psi);
      out.energy = cands[i].flow.energy;
      out.mu = cands[i].flow.mu;
      out.quartic = cands[i].flow.quartic;
      out.residual = cands[i].flow.residual;
      out.iterations = cands[i].flow.iterations;
      out.init_label = cands[i].label;
      out.converged = true;
      have = true;
      break;
    }
  } else {
    // Stage 2: refine the best coarse basins on the full grid; basins can
    // reorder between resolutions, so polish every promoted candidate and
    // keep the lowest fine energy.
    const size_t promote = std::min<size_t>(2, rank.size());
    for (size_t p = 0; p < promote; ++p) {
      Candidate& c = cands[rank[p]];
      CField3 psi = prolong3(cg, c.psi, g);
      normalize3(g, psi);
      FlowOut3 fo = flow3(g, V, omega, gc, order, opts.tol, opts.max_iter, psi);
      cands[rank[p]].flow.residual = fo.residual;  // for the error report
      if (!fo.converged) continue;
      bool better = !have || fo.energy < out.energy ||
                    (fo.energy == out.energy && c.label < out.init_label);
      if (better) {
        out.psi = std::move(psi);
        out.energy = fo.energy;
        out.mu = fo.mu;
        out.quartic = fo.quartic;
        out.residual = fo.residual;
        out.iterations = fo.iterations;
        out.init_label = c.label;
        out.converged = true;
        have = true;
      }
    }
  }

  if (!have) {
    std::ostringstream msg;
    msg << "gp3d: no start reached residual " << opts.tol
        << " * max(1,|mu|); per-start residuals:";
    for (size_t i : rank)
      msg << " " << cands[i].label << "=" << cands[i].flow.residual;
    fail(3, msg.str());
  }

  lz_statistics(g, order, out.psi, out.lz_mean, out.lz_variance);
  out.vortices = detect_vortices(g, out.psi, g.n / 2, 1e-3, &out.vortex_skipped);
  return out;
}

}  // namespace rotgas
