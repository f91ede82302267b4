#include "grid3.hpp"

#include <cmath>

namespace rotgas {

Field3 potential_table3(const CartGrid& g, const TrapSpec& t) {
  Field3 V(g.size());
  for (int i = 0; i < g.n; ++i) {
    const double x = g.coord(i);
    for (int j = 0; j < g.n; ++j) {
      const double y = g.coord(j);
      const double r = std::sqrt(x * x + y * y);
      for (int k = 0; k < g.n; ++k) V[g.idx(i, j, k)] = t(r, g.coord(k));
    }
  }
  return V;
}

Cplx cdot3(const CartGrid& g, const CField3& a, const CField3& b) {
  // Row-wise accumulation keeps the sum order fixed and the error low.
  Cplx total = 0.0;
  const long n2 = (long)g.n * g.n;
  for (int i = 0; i < g.n; ++i) {
    Cplx row = 0.0;
    const Cplx* pa = a.data() + (long)i * n2;
    const Cplx* pb = b.data() + (long)i * n2;
    for (long t = 0; t < n2; ++t) row += std::conj(pa[t]) * pb[t];
    total += row;
  }
  return total * g.weight();
}

double norm3(const CartGrid& g, const CField3& a) {
  double s = 0.0;
  const long n2 = (long)g.n * g.n;
  for (int i = 0; i < g.n; ++i) {
    double row = 0.0;
    const Cplx* pa = a.data() + (long)i * n2;
    for (long t = 0; t < n2; ++t) row += std::norm(pa[t]);
    s += row;
  }
  return std::sqrt(s * g.weight());
}

void normalize3(const CartGrid& g, CField3& a) {
  double nn = norm3(g, a);
  require(nn > 0.0, 5, "grid3: cannot normalize the zero field");
  double inv = 1.0 / nn;
  for (auto& v : a) v *= inv;
}

double quartic3(const CartGrid& g, const CField3& a) {
  double s = 0.0;
  const long n2 = (long)g.n * g.n;
  for (int i = 0; i < g.n; ++i) {
    double row = 0.0;
    const Cplx* pa = a.data() + (long)i * n2;
    for (long t = 0; t < n2; ++t) {
      double m = std::norm(pa[t]);
      row += m * m;
    }
    s += row;
  }
  return s * g.weight();
}

CField3 prolong3(const CartGrid& src, const CField3& f, const CartGrid& dst) {
  CField3 out(dst.size(), Cplx(0.0, 0.0));
  auto sample = [&](double x, double y, double z) -> Cplx {
    // Fractional source index; cell-centered, zero outside.
    double fx = (x + src.half) / src.h - 0.5;
    double fy = (y + src.half) / src.h - 0.5;
    double fz = (z + src.half) / src.h - 0.5;
    int ix = (int)std::floor(fx), iy = (int)std::floor(fy),
        iz = (int)std::floor(fz);
    double tx = fx - ix, ty = fy - iy, tz = fz - iz;
    Cplx acc = 0.0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c) {
          int sx = ix + a, sy = iy + b, sz = iz + c;
          if (sx < 0 || sy < 0 || sz < 0 || sx >= src.n || sy >= src.n ||
              sz >= src.n)
            continue;
          double wgt = (a ? tx : 1.0 - tx) * (b ? ty : 1.0 - ty) *
                       (c ? tz : 1.0 - tz);
          acc += wgt * f[src.idx(sx, sy, sz)];
        }
    return acc;
  };
  for (int i = 0; i < dst.n; ++i)
    for (int j = 0; j < dst.n; ++j)
      for (int k = 0; k < dst.n; ++k)
        out[dst.idx(i, j, k)] =
            sample(dst.coord(i), dst.coord(j), dst.coord(k));
  return out;
}

}  // namespace rotgas
