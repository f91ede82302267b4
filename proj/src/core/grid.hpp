#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "banded.hpp"
#include "util.hpp"

namespace rotgas {

// Trap potential V(r,z) = radial_coeff * r^s + axial_coeff * |z|^p + offset.
// s,p >= 2 keep [V - omega^2 r^2/4]_- bounded below critical rotation.
struct TrapSpec {
  double radial_coeff = 1.0;
  double s = 2.0;
  double axial_coeff = 1.0;
  double p = 2.0;
  double offset = 0.0;

  void validate() const {
    require(std::isfinite(radial_coeff) && radial_coeff > 0.0, 2,
            "trap: radial_coeff must be positive");
    require(std::isfinite(axial_coeff) && axial_coeff > 0.0, 2,
            "trap: axial_coeff must be positive");
    require(std::isfinite(s) && s >= 2.0, 2, "trap: s must be >= 2");
    require(std::isfinite(p) && p >= 2.0, 2, "trap: p must be >= 2");
    require(std::isfinite(offset), 2, "trap: offset must be finite");
  }

  double operator()(double r, double z) const {
    double rad = (s == 2.0) ? radial_coeff * r * r
                            : radial_coeff * std::pow(r, s);
    double az = std::abs(z);
    double ax = (p == 2.0) ? axial_coeff * az * az
                           : axial_coeff * std::pow(az, p);
    return rad + ax + offset;
  }

  // Rotation speed beyond which V - omega^2 r^2 / 4 is unbounded below:
  // 2*sqrt(radial_coeff) for a harmonic radial trap, +inf for s > 2.
  double critical_omega() const {
    return s == 2.0 ? 2.0 * std::sqrt(radial_coeff)
                    : std::numeric_limits<double>::infinity();
  }
};

// Cell-centered cylindrical grid: r_i = (i+1/2)dr on (0, r_max),
// z_j = -z_max + (j+1/2)dz. Fields obey Dirichlet conditions half a cell
// outside the outer walls (zero extension); the r=0 axis needs no boundary
// condition because the radial flux through it vanishes identically.
struct RadialGrid {
  int nr = 0;
  int nz = 0;
  double r_max = 0.0;
  double z_max = 0.0;
  double dr = 0.0;
  double dz = 0.0;

  RadialGrid() = default;
  RadialGrid(int nr_, int nz_, double rm, double zm)
      : nr(nr_), nz(nz_), r_max(rm), z_max(zm) {
    require(nr >= 8 && nz >= 8, 2, "grid: nr and nz must be >= 8");
    require(nr <= 4096 && nz <= 4096, 2, "grid: nr and nz must be <= 4096");
    require(std::isfinite(rm) && rm > 0 && std::isfinite(zm) && zm > 0, 2,
            "grid: r_max and z_max must be positive");
    dr = r_max / nr;
    dz = 2.0 * z_max / nz;
  }

  double r(int i) const { return (i + 0.5) * dr; }
  double z(int j) const { return -z_max + (j + 0.5) * dz; }
  int idx(int i, int j) const { return i * nz + j; }
  int size() const { return nr * nz; }
  // Quadrature weight of cell (i,j): 2*pi*r_i*dr*dz.
  double weight(int i) const { return 2.0 * kPi * r(i) * dr * dz; }
};

using Field2 = std::vector<double>;  // size grid.size(), index grid.idx(i,j)

// --- quadrature -----------------------------------------------------------

double dot_w(const RadialGrid& g, const Field2& a, const Field2& b);
double norm_w(const RadialGrid& g, const Field2& a);
void normalize_w(const RadialGrid& g, Field2& a);
// integral of a*b*c*d (pass the same field for plain powers)
double quartic_w(const RadialGrid& g, const Field2& f);
double integral_w(const RadialGrid& g, const Field2& f);  // int f dV

// --- trap table -----------------------------------------------------------

Field2 potential_table(const RadialGrid& g, const TrapSpec& t);

// --- channel operator ------------------------------------------------------
// H_n = -Lap_r - d^2/dz^2 + n^2/r^2 + V (+ diagonal extra), acting on the
// radial profile of a winding-n function. Flux-form radial Laplacian:
// (-Lap_r f)_i = [ r_{i+1/2}(f_i - f_{i+1}) + r_{i-1/2}(f_i - f_{i-1}) ]
//                / (r_i dr^2),
// which is exactly the centered second-order stencil with the regularity-
// consistent mirrored ghost at the axis, and is self-adjoint under the
// cell weights 2*pi*r_i*dr*dz.

struct ChannelOp {
  const RadialGrid* g = nullptr;
  const Field2* V = nullptr;      // potential table
  const Field2* extra = nullptr;  // optional diagonal (e.g. 8*pi*g*rho)
  int n = 0;

  void apply(const double* f, double* y) const;
  void apply(const Field2& f, Field2& y) const {
    y.resize(f.size());
    apply(f.data(), y.data());
  }
};

// <f, H_n f>_w for a unit or non-unit field (no normalization applied).
double channel_quadratic_form(const ChannelOp& op, const Field2& f);

// Symmetrized band matrix D (H_n + shift) D^{-1} with D = diag(sqrt(r_i)),
// ordered p = i*nz + j (bandwidth nz). Plain l2-symmetric; used for
// preconditioning and linear solves.
BandMatrix channel_band(const RadialGrid& g, const Field2& V, int n,
                        const Field2* extra, double shift);

// Scale helpers between f-coordinates and symmetrized s-coordinates
// (s = sqrt(w) * f, so l2 dots of s-vectors equal weighted dots of fields).
void to_scoords(const RadialGrid& g, const Field2& f, Field2& s);
void from_scoords(const RadialGrid& g, const Field2& s, Field2& f);

// Bilinear resample between cylindrical grids (zero outside the source).
Field2 regrid(const RadialGrid& src, const Field2& f, const RadialGrid& dst);

}  // namespace rotgas
