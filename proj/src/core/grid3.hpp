#pragma once
// Cubic Cartesian grid for the 3D complex order-parameter solver.
//
// Cell-centered nodes x_i = -half + (i + 0.5) h, i = 0..n-1, h = 2*half/n,
// identical along all three axes; homogeneous Dirichlet data outside the
// box. Index layout idx(i,j,k) = (i*n + j)*n + k (x slowest, z fastest).

#include <complex>
#include <vector>

#include "grid.hpp"

namespace rotgas {

using Cplx = std::complex<double>;
using CField3 = std::vector<Cplx>;
using Field3 = std::vector<double>;

struct CartGrid {
  int n = 0;
  double half = 0.0;  // box is [-half, half]^3
  double h = 0.0;

  CartGrid() = default;
  CartGrid(int n_, double half_) : n(n_), half(half_) {
    require(n >= 8 && n <= 512, 2, "grid3: n must be in [8, 512]");
    require(std::isfinite(half) && half > 0, 2,
            "grid3: half-extent must be positive");
    h = 2.0 * half / n;
  }

  double coord(int i) const { return -half + (i + 0.5) * h; }
  long idx(int i, int j, int k) const {
    return ((long)i * n + j) * n + k;
  }
  long size() const { return (long)n * n * n; }
  double weight() const { return h * h * h; }
};

// V(x,y,z) = trap(sqrt(x^2+y^2), z) tabulated on the grid.
Field3 potential_table3(const CartGrid& g, const TrapSpec& t);

// h^3-weighted inner product, Re/full variants.
Cplx cdot3(const CartGrid& g, const CField3& a, const CField3& b);
double norm3(const CartGrid& g, const CField3& a);
void normalize3(const CartGrid& g, CField3& a);

// int |psi|^4 dV.
double quartic3(const CartGrid& g, const CField3& a);

// Trilinear prolongation between two grids with the same extent (used by
// the coarse-to-fine cascade). Values outside the source box are zero.
CField3 prolong3(const CartGrid& src, const CField3& f, const CartGrid& dst);

}  // namespace rotgas
