#include "grid.hpp"

#include <algorithm>
#include <limits>

namespace rotgas {

double dot_w(const RadialGrid& g, const Field2& a, const Field2& b) {
  double acc = 0.0;
  for (int i = 0; i < g.nr; ++i) {
    const double w = g.weight(i);
    const double* pa = a.data() + g.idx(i, 0);
    const double* pb = b.data() + g.idx(i, 0);
    double row = 0.0;
    for (int j = 0; j < g.nz; ++j) row += pa[j] * pb[j];
    acc += w * row;
  }
  return acc;
}

double norm_w(const RadialGrid& g, const Field2& a) {
  return std::sqrt(dot_w(g, a, a));
}

void normalize_w(const RadialGrid& g, Field2& a) {
  double nrm = norm_w(g, a);
  require(nrm > 0.0 && std::isfinite(nrm), 3, "cannot normalize a zero field");
  double inv = 1.0 / nrm;
  for (auto& v : a) v *= inv;
}

double quartic_w(const RadialGrid& g, const Field2& f) {
  double acc = 0.0;
  for (int i = 0; i < g.nr; ++i) {
    const double w = g.weight(i);
    const double* p = f.data() + g.idx(i, 0);
    double row = 0.0;
    for (int j = 0; j < g.nz; ++j) {
      double q = p[j] * p[j];
      row += q * q;
    }
    acc += w * row;
  }
  return acc;
}

double integral_w(const RadialGrid& g, const Field2& f) {
  double acc = 0.0;
  for (int i = 0; i < g.nr; ++i) {
    const double w = g.weight(i);
    const double* p = f.data() + g.idx(i, 0);
    double row = 0.0;
    for (int j = 0; j < g.nz; ++j) row += p[j];
    acc += w * row;
  }
  return acc;
}

Field2 potential_table(const RadialGrid& g, const TrapSpec& t) {
  Field2 V((size_t)g.size());
  for (int i = 0; i < g.nr; ++i)
    for (int j = 0; j < g.nz; ++j) V[g.idx(i, j)] = t(g.r(i), g.z(j));
  return V;
}

void ChannelOp::apply(const double* f, double* y) const {
  const RadialGrid& gr = *g;
  const int nr = gr.nr, nz = gr.nz;
  const double idr2 = 1.0 / (gr.dr * gr.dr);
  const double idz2 = 1.0 / (gr.dz * gr.dz);
  const double* V_ = V->data();
  const double* ex = extra ? extra->data() : nullptr;
  const double nn = double(n) * double(n);

  for (int i = 0; i < nr; ++i) {
    const double ri = gr.r(i);
    const double rp = (i + 1) * gr.dr;  // r_{i+1/2}
    const double rm = i * gr.dr;        // r_{i-1/2}
    const double cp = rp / ri * idr2;
    const double cm = rm / ri * idr2;
    const double cent = nn / (ri * ri);
    const double* fr = f + (size_t)i * nz;
    const double* fu = (i + 1 < nr) ? f + (size_t)(i + 1) * nz : nullptr;
    const double* fd = (i > 0) ? f + (size_t)(i - 1) * nz : nullptr;
    const double* Vr = V_ + (size_t)i * nz;
    const double* er = ex ? ex + (size_t)i * nz : nullptr;
    double* yr = y + (size_t)i * nz;
    for (int j = 0; j < nz; ++j) {
      double up = fu ? fu[j] : 0.0;
      double dn = fd ? fd[j] : 0.0;
      double zp = (j + 1 < nz) ? fr[j + 1] : 0.0;
      double zm = (j > 0) ? fr[j - 1] : 0.0;
      double lap_r = cp * (fr[j] - up) + cm * (fr[j] - dn);
      double lap_z = idz2 * (2.0 * fr[j] - zp - zm);
      double diag = (cent + Vr[j] + (er ? er[j] : 0.0)) * fr[j];
      yr[j] = lap_r + lap_z + diag;
    }
  }
}

double channel_quadratic_form(const ChannelOp& op, const Field2& f) {
  Field2 y;
  op.apply(f, y);
  return dot_w(*op.g, f, y);
}

BandMatrix channel_band(const RadialGrid& g, const Field2& V, int n,
                        const Field2* extra, double shift) {
  const int nr = g.nr, nz = g.nz;
  BandMatrix m(nr * nz, nz);
  const double idr2 = 1.0 / (g.dr * g.dr);
  const double idz2 = 1.0 / (g.dz * g.dz);
  const double nn = double(n) * double(n);
  for (int i = 0; i < nr; ++i) {
    const double ri = g.r(i);
    const double cent = nn / (ri * ri);
    for (int j = 0; j < nz; ++j) {
      const int p = g.idx(i, j);
      double diag = 2.0 * idr2 + 2.0 * idz2 + cent + V[p] + shift;
      if (extra) diag += (*extra)[p];
      m.at(p, p) = diag;
      if (j + 1 < nz) m.at(p + 1, p) = -idz2;
      if (i + 1 < nr) {
        const double rp = (i + 1) * g.dr;  // r_{i+1/2}
        const double cpl = -rp * idr2 / std::sqrt(ri * g.r(i + 1));
        m.at(g.idx(i + 1, j), p) = cpl;
      }
    }
  }
  return m;
}

void to_scoords(const RadialGrid& g, const Field2& f, Field2& s) {
  s.resize(f.size());
  for (int i = 0; i < g.nr; ++i) {
    const double d = std::sqrt(g.weight(i));
    const double* pf = f.data() + g.idx(i, 0);
    double* ps = s.data() + g.idx(i, 0);
    for (int j = 0; j < g.nz; ++j) ps[j] = d * pf[j];
  }
}

void from_scoords(const RadialGrid& g, const Field2& s, Field2& f) {
  f.resize(s.size());
  for (int i = 0; i < g.nr; ++i) {
    const double d = 1.0 / std::sqrt(g.weight(i));
    const double* ps = s.data() + g.idx(i, 0);
    double* pf = f.data() + g.idx(i, 0);
    for (int j = 0; j < g.nz; ++j) pf[j] = d * ps[j];
  }
}

Field2 regrid(const RadialGrid& src, const Field2& f, const RadialGrid& dst) {
  Field2 out((size_t)dst.size(), 0.0);
  for (int i = 0; i < dst.nr; ++i) {
    const double r = dst.r(i);
    // fractional source index in r (cell centers at (k+1/2)*dr)
    double xr = r / src.dr - 0.5;
    int ir = (int)std::floor(xr);
    double tr = xr - ir;
    for (int j = 0; j < dst.nz; ++j) {
      const double z = dst.z(j);
      double xz = (z + src.z_max) / src.dz - 0.5;
      int jz = (int)std::floor(xz);
      double tz = xz - jz;
      auto at = [&](int a, int b) -> double {
        if (b < 0 || b >= src.nz) return 0.0;
        if (a >= src.nr) return 0.0;
        if (a < 0) return f[src.idx(0, b)];  // even reflection across axis
        return f[src.idx(a, b)];
      };
      double v = (1 - tr) * ((1 - tz) * at(ir, jz) + tz * at(ir, jz + 1)) +
                 tr * ((1 - tz) * at(ir + 1, jz) + tz * at(ir + 1, jz + 1));
      out[dst.idx(i, j)] = v;
    }
  }
  return out;
}

}  // namespace rotgas
