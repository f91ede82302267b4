#include "banded.hpp"

#include <lapacke.h>

#include <string>
#include <utility>

#include "util.hpp"

namespace rotgas {

void BandChol::factor(BandMatrix m) {
  m_ = std::move(m);
  ok_ = false;
  lapack_int info = LAPACKE_dpbtrf(LAPACK_COL_MAJOR, 'L', m_.n, m_.kd,
                                   m_.ab.data(), m_.kd + 1);
  require(info == 0, 6,
          "banded Cholesky failed (matrix not SPD, info=" +
              std::to_string((long)info) + ")");
  ok_ = true;
}

void BandChol::solve(double* x) const {
  require(ok_, 6, "banded solve on an unfactored matrix");
  lapack_int info = LAPACKE_dpbtrs(LAPACK_COL_MAJOR, 'L', m_.n, m_.kd, 1,
                                   m_.ab.data(), m_.kd + 1, x, m_.n);
  require(info == 0, 6, "banded triangular solve failed");
}

}  // namespace rotgas
