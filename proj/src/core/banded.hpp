#pragma once

#include <vector>

namespace rotgas {

// Symmetric banded matrix, LAPACK lower band storage, column-major:
// entry (i,j) with j <= i <= j+kd lives at ab[j*(kd+1) + (i-j)].
struct BandMatrix {
  int n = 0;
  int kd = 0;
  std::vector<double> ab;

  BandMatrix() = default;
  BandMatrix(int n_, int kd_) : n(n_), kd(kd_), ab((size_t)n_ * (kd_ + 1), 0.0) {}

  double& at(int i, int j) {  // requires j <= i <= j+kd
    return ab[(size_t)j * (kd + 1) + (i - j)];
  }
  void add_shift(double s) {
    for (int j = 0; j < n; ++j) ab[(size_t)j * (kd + 1)] += s;
  }
};

// Cholesky factorization of an SPD band matrix (dpbtrf) plus solves.
class BandChol {
 public:
  BandChol() = default;

  // Factors in place; throws Error(RG_ERR_INTERNAL) if not SPD.
  void factor(BandMatrix m);

  bool valid() const { return ok_; }
  int size() const { return m_.n; }

  // Solves A x = b in place.
  void solve(double* x) const;
  void solve(std::vector<double>& x) const { solve(x.data()); }

 private:
  BandMatrix m_;
  bool ok_ = false;
};

}  // namespace rotgas
