#include "solvers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace rotgas {

namespace {

double dot(const Field2& a, const Field2& b) {
  double s = 0.0;
  for (size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

void axpy(double a, const Field2& x, Field2& y) {
  for (size_t k = 0; k < y.size(); ++k) y[k] += a * x[k];
}

// y = A x in symmetrized coordinates (plain l2-symmetric operator).
struct SymApply {
  const RadialGrid* g;
  const Field2* V;
  const Field2* extra;
  int n;
  mutable Field2 tmp_f, tmp_y;

  void operator()(const Field2& x, Field2& y) const {
    from_scoords(*g, x, tmp_f);
    ChannelOp op{g, V, extra, n};
    op.apply(tmp_f, tmp_y);
    to_scoords(*g, tmp_y, y);
  }
};

double vmin(const Field2& v) {
  double m = v[0];
  for (double x : v) m = std::min(m, x);
  return m;
}

}  // namespace

void ChannelPrecond::build(const RadialGrid& g, const Field2& V, int n_,
                           const Field2* extra, double shift_) {
  n = n_;
  shift = shift_;
  BandMatrix m = channel_band(g, V, n_, extra, shift_);
  chol.factor(std::move(m));
  age = 0;
  valid = true;
}

void ChannelPrecond::apply(const RadialGrid& g, const Field2& x,
                           Field2& y) const {
  to_scoords(g, x, y);
  chol.solve(y);
  Field2 tmp;
  from_scoords(g, y, tmp);
  y.swap(tmp);
}

EigOut channel_ground(const RadialGrid& g, const Field2& V, int n,
                      const Field2* extra, double tol_abs, int64_t max_iter,
                      Field2& f, ChannelPrecond* pre) {
  const int N = g.size();
  SymApply A{&g, &V, extra, n, {}, {}};

  // Start vector in s-coordinates.
  Field2 x;
  if ((int)f.size() == N) {
    to_scoords(g, f, x);
  } else {
    Field2 guess = channel_initial_guess(g, V, n, 0.0);
    to_scoords(g, guess, x);
  }
  double nx = std::sqrt(dot(x, x));
  require(nx > 0, 3, "eigensolver start vector is zero");
  for (auto& v : x) v /= nx;

  // Preconditioner: H + extra shifted to be safely positive definite.
  ChannelPrecond local;
  ChannelPrecond* P = pre ? pre : &local;
  double shift = std::max(1.0, 1.0 - vmin(V));
  if (!P->valid || P->n != n) P->build(g, V, n, extra, shift);

  Field2 Ax(N), w(N), Aw(N), p, Ap, r(N), ws(N);
  A(x, Ax);
  double theta = dot(x, Ax);

  EigOut out;
  for (int64_t it = 1; it <= max_iter; ++it) {
    out.iterations = it;
    for (int k = 0; k < N; ++k) r[k] = Ax[k] - theta * x[k];
    double rn = std::sqrt(dot(r, r));
    out.value = theta;
    out.residual = rn;
    if (rn <= tol_abs) {
      out.converged = true;
      break;
    }
    // precondition in s-coords directly
    w = r;
    P->chol.solve(w.data());
    // Rayleigh-Ritz over span{x, w, p}
    // Orthonormalize w (and p) against x.
    double xw = dot(x, w);
    axpy(-xw, x, w);
    double nw = std::sqrt(dot(w, w));
    if (!(nw > 1e-14)) {  // preconditioner gave nothing new; rebuild once
      P->build(g, V, n, extra, shift);
      w = r;
      P->chol.solve(w.data());
      xw = dot(x, w);
      axpy(-xw, x, w);
      nw = std::sqrt(dot(w, w));
      if (!(nw > 1e-14)) break;
    }
    for (auto& v : w) v /= nw;
    A(w, Aw);

    bool use_p = !p.empty();
    if (use_p) {
      double xp = dot(x, p);
      axpy(-xp, x, p);
      double wp = dot(w, p);
      axpy(-wp, w, p);
      double np = std::sqrt(dot(p, p));
      if (np > 1e-10) {
        for (auto& v : p) v /= np;
        // keep Ap consistent: recompute (cheap relative to factorization)
        A(p, Ap);
      } else {
        use_p = false;
      }
    }

    int m = use_p ? 3 : 2;
    Eigen::Matrix3d G = Eigen::Matrix3d::Zero();
    const Field2* basis[3] = {&x, &w, use_p ? &p : nullptr};
    const Field2* abasis[3] = {&Ax, &Aw, use_p ? &Ap : nullptr};
    for (int a = 0; a < m; ++a)
      for (int b = a; b < m; ++b) {
        G(a, b) = dot(*basis[a], *abasis[b]);
        G(b, a) = G(a, b);
      }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        G.topLeftCorner(m, m));
    Eigen::VectorXd c = es.eigenvectors().col(0);
    theta = es.eigenvalues()(0);

    Field2 xn(N, 0.0), Axn(N, 0.0), pn(N, 0.0), Apn(N, 0.0);
    for (int a = 0; a < m; ++a) {
      axpy(c(a), *basis[a], xn);
      axpy(c(a), *abasis[a], Axn);
      if (a >= 1) {
        axpy(c(a), *basis[a], pn);
        axpy(c(a), *abasis[a], Apn);
      }
    }
    double nxn = std::sqrt(dot(xn, xn));
    for (auto& v : xn) v /= nxn;
    for (auto& v : Axn) v /= nxn;
    x.swap(xn);
    Ax.swap(Axn);
    p.swap(pn);
    Ap.swap(Apn);
    P->age++;
  }

  // Return eigenvector in field coordinates with a fixed sign convention
  // (nonnegative weighted integral) so results are deterministic.
  from_scoords(g, x, f);
  if (integral_w(g, f) < 0)
    for (auto& v : f) v = -v;
  return out;
}

Field2 channel_initial_guess(const RadialGrid& g, const Field2& V, int n,
                             double coupling) {
  const int N = g.size();
  Field2 f((size_t)N, 0.0);
  const double nn = double(n) * double(n);

  if (coupling > 1e-8) {
    // Thomas-Fermi: rho = max(0, mu - V - n^2/r^2)/(8 pi g), mass 1.
    auto mass = [&](double mu) {
      double acc = 0.0;
      for (int i = 0; i < g.nr; ++i) {
        double w = g.weight(i);
        double cent = nn / (g.r(i) * g.r(i));
        for (int j = 0; j < g.nz; ++j) {
          double gap = mu - V[g.idx(i, j)] - cent;
          if (gap > 0) acc += w * gap;
        }
      }
      return acc / (8.0 * kPi * coupling);
    };
    double lo = vmin(V);  // below every effective potential value
    double span = 1.0;
    while (mass(lo + span) < 1.0 && span < 1e12) span *= 2.0;
    if (span < 1e12) {
      double hi = lo + span;
      for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (lo + hi);
        (mass(mid) < 1.0 ? lo : hi) = mid;
      }
      double mu = 0.5 * (lo + hi);
      for (int i = 0; i < g.nr; ++i) {
        double cent = nn / (g.r(i) * g.r(i));
        for (int j = 0; j < g.nz; ++j) {
          double gap = mu - V[g.idx(i, j)] - cent;
          f[g.idx(i, j)] = gap > 0 ? std::sqrt(gap / (8.0 * kPi * coupling))
                                   : 0.0;
        }
      }
      double nrm = norm_w(g, f);
      if (nrm > 1e-12) {
        for (auto& v : f) v /= nrm;
        return f;
      }
    }
  }

  // Gaussian times r^n, assembled in logs so large n cannot overflow.
  // Width follows the harmonic parts of the trap when present.
  double ar = 1.0, az = 1.0;
  {
    // crude scale from the potential table: V(r_mid)/r_mid^2 ~ coeff
    int imid = g.nr / 2, jmid = g.nz / 2;
    double rm = g.r(imid);
    double vz0 = V[g.idx(imid, g.nz / 2)];
    (void)vz0;
    double c_r = std::max(1e-6, (V[g.idx(imid, jmid)] - vmin(V)) / (rm * rm));
    ar = std::sqrt(c_r);
    az = ar;
  }
  double lmax = -1e300;
  Field2 lg((size_t)N);
  for (int i = 0; i < g.nr; ++i) {
    double r = g.r(i);
    for (int j = 0; j < g.nz; ++j) {
      double z = g.z(j);
      double l = n * std::log(r) - 0.5 * ar * r * r - 0.5 * az * z * z;
      lg[g.idx(i, j)] = l;
      lmax = std::max(lmax, l);
    }
  }
  for (int k = 0; k < N; ++k) f[k] = std::exp(lg[k] - lmax);
  normalize_w(g, f);
  return f;
}

FlowOut channel_flow(const RadialGrid& g, const Field2& V, int n,
                     double g_self, const Field2* extra, double tol_rel,
                     int64_t max_iter, Field2& f, ChannelPrecond* pre) {
  const int N = g.size();
  require((int)f.size() == N, 2, "flow: start field has wrong size");
  const double c4 = 4.0 * kPi * g_self;
  const double c8 = 8.0 * kPi * g_self;

  ChannelOp lin{&g, &V, extra, n};

  auto energy_of = [&](const Field2& u, double* mu, double* quart) {
    Field2 y;
    lin.apply(u, y);
    double a = dot_w(g, u, y);
    double q = quartic_w(g, u);
    if (mu) *mu = a + c8 * q;
    if (quart) *quart = q;
    return a + c4 * q;
  };

  normalize_w(g, f);

  ChannelPrecond local;
  ChannelPrecond* P = pre ? pre : &local;
  auto rebuild = [&](const Field2& u, double mu_est) {
    Field2 diag((size_t)N, 0.0);
    if (extra) diag = *extra;
    for (int k = 0; k < N; ++k) diag[k] += c8 * u[k] * u[k];
    double shift = std::max({1.0, 1.0 - vmin(V), 0.5 * std::abs(mu_est)});
    P->build(g, V, n, &diag, shift);
  };

  FlowOut out;
  Field2 hy(N), res(N), d(N), cand(N);
  double mu = 0.0, q = 0.0;
  double E = energy_of(f, &mu, &q);
  if (!P->valid || P->n != n) rebuild(f, mu);
  double beta0 = 1.0;
  int stall = 0;

  for (int64_t it = 1; it <= max_iter; ++it) {
    out.iterations = it;
    lin.apply(f, hy);
    double a = dot_w(g, f, hy);
    q = quartic_w(g, f);
    E = a + c4 * q;
    mu = E + c4 * q;  // exactly E + 4*pi*g*q on the stored doubles
    for (int k = 0; k < N; ++k)
      res[k] = hy[k] + c8 * f[k] * f[k] * f[k] - mu * f[k];
    double rn = norm_w(g, res);
    out.energy = E;
    out.mu_tilde = mu;
    out.residual = rn;
    out.quartic = q;
    if (rn <= tol_rel * std::max(1.0, std::abs(mu))) {
      out.converged = true;
      return out;
    }
    if (P->age >= 64) rebuild(f, mu);

    P->apply(g, res, d);
    double slope = dot_w(g, res, d);
    if (!(slope > 0)) {  // preconditioner stale beyond usefulness
      rebuild(f, mu);
      P->apply(g, res, d);
      slope = dot_w(g, res, d);
      if (!(slope > 0)) d = res, slope = rn * rn;
    }

    double beta = beta0;
    bool accepted = false;
    for (int bt = 0; bt < 30; ++bt) {
      for (int k = 0; k < N; ++k) cand[k] = std::abs(f[k] - beta * d[k]);
      double nrm = norm_w(g, cand);
      if (nrm > 0) {
        for (auto& v : cand) v /= nrm;
        double Ec = energy_of(cand, nullptr, nullptr);
        if (Ec <= E - 1e-4 * beta * slope + 1e-13 * std::abs(E)) {
          f.swap(cand);
          accepted = true;
          P->age++;
          beta0 = std::min(1.0, beta * 1.4);
          break;
        }
      }
      beta *= 0.5;
      if (beta < 1e-7 && P->age > 0) {
        rebuild(f, mu);
        P->apply(g, res, d);
        slope = dot_w(g, res, d);
        beta = 1.0;
      }
    }
    if (!accepted) {
      if (++stall >= 3) break;  // report unconverged with current stats
      rebuild(f, mu);
    } else {
      stall = 0;
    }
  }
  return out;
}

}  // namespace rotgas
