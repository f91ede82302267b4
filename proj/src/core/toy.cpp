#include "toy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <Eigen/Dense>

#include "util.hpp"

namespace rotgas {

namespace {

constexpr int kMaxModes = 16;
constexpr int kDimCap = 200000;
constexpr int kDenseCap = 2000;

// Radial part of mode m: R_m(r) = r^m exp(-r^2/2) / sqrt(pi m!), so that
// 2 pi Int R_m^2 r dr = 1.
double radial_mode(int m, double r) {
  double lg = m * std::log(std::max(r, 1e-300)) - 0.5 * r * r -
              0.5 * (std::log(kPi) + std::lgamma(m + 1.0));
  return std::exp(lg);
}

double lfact(int k) { return std::lgamma(k + 1.0); }

}  // namespace

double mode_interaction_reference(int k, int l, int mm, int nn) {
  if (k + l != mm + nn) return 0.0;
  int S = k + l;
  double lg = lfact(S) - std::log(2.0 * kPi) - S * std::log(2.0) -
              0.5 * (lfact(k) + lfact(l) + lfact(mm) + lfact(nn));
  return std::exp(lg);
}

ModeSet build_modes(int M) {
  require(M >= 2 && M <= kMaxModes, 2, "toy: M must be in [2, 16]");
  ModeSet ms;
  ms.M = M;
  ms.m.resize(M);
  ms.e.resize(M);
  for (int k = 0; k < M; ++k) {
    ms.m[k] = k;
    ms.e[k] = 2.0 * (k + 1);
  }

  // Composite Simpson quadrature of 2 pi Int R_k R_l R_m R_n r dr on
  // [0, 10]; the integrand decays like exp(-2 r^2).
  const int nq = 8192;
  const double rmax = 10.0;
  const double h = rmax / nq;
  std::vector<double> nodes(nq + 1), wgt(nq + 1);
  for (int i = 0; i <= nq; ++i) {
    nodes[i] = i * h;
    wgt[i] = (i == 0 || i == nq) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    wgt[i] *= h / 3.0;
  }
  std::vector<std::vector<double>> R(M, std::vector<double>(nq + 1));
  for (int k = 0; k < M; ++k)
    for (int i = 0; i <= nq; ++i) R[k][i] = radial_mode(k, nodes[i]);

  ms.V.assign((size_t)M * M * M * M, 0.0);
  auto at = [&](int a, int b, int c, int d) -> double& {
    return ms.V[(((size_t)a * M + b) * M + c) * M + d];
  };
  for (int k = 0; k < M; ++k)
    for (int l = k; l < M; ++l)
      for (int mm = 0; mm < M; ++mm) {
        int nn = k + l - mm;
        if (nn < mm || nn >= M) continue;  // canonical: k<=l, mm<=nn
        if (std::make_pair(k, l) > std::make_pair(mm, nn)) continue;
        double acc = 0.0;
        for (int i = 0; i <= nq; ++i)
          acc += wgt[i] * R[k][i] * R[l][i] * R[mm][i] * R[nn][i] * nodes[i];
        double val = 2.0 * kPi * acc;
        // propagate to every index image so the symmetries hold exactly
        int ks[2] = {k, l}, ms_[2] = {mm, nn};
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) {
            at(ks[a], ks[1 - a], ms_[b], ms_[1 - b]) = val;
            at(ms_[b], ms_[1 - b], ks[a], ks[1 - a]) = val;
          }
      }
  return ms;
}

std::uint64_t FockBasis::key(const std::vector<int>& occ) {
  std::uint64_t k = 0;
  for (int v : occ) k = k * 211 + (std::uint64_t)(v + 1);
  return k;
}

int FockBasis::index(const std::vector<int>& occ) const {
  auto it = lookup.find(key(occ));
  require(it != lookup.end(), 4, "toy: occupation vector outside the basis");
  return it->second;
}

FockBasis fock_basis(int N, int M) {
  require(N >= 1 && M >= 2, 2, "toy: need N >= 1 and M >= 2");
  FockBasis b;
  b.N = N;
  b.M = M;
  std::vector<int> occ(M, 0);
  // lexicographic enumeration over (occ_0, ..., occ_{M-1})
  std::function<void(int, int)> rec = [&](int mode, int left) {
    if (mode == M - 1) {
      occ[mode] = left;
      b.states.push_back(occ);
      return;
    }
    for (int c = 0; c <= left; ++c) {
      occ[mode] = c;
      rec(mode + 1, left - c);
    }
  };
  rec(0, N);
  require((int)b.states.size() <= kDimCap, 2,
          "toy: bosonic basis dimension exceeds the 2e5 cap");
  b.lookup.reserve(b.states.size() * 2);
  for (int i = 0; i < (int)b.states.size(); ++i)
    b.lookup.emplace(FockBasis::key(b.states[i]), i);
  return b;
}

void SparseSym::apply(const double* x, double* y) const {
  for (int a = 0; a < dim; ++a) {
    double acc = 0.0;
    for (const auto& [b, h] : rows[a]) acc += h * x[b];
    y[a] = acc;
  }
}

double SparseSym::hermiticity_defect() const {
  double worst = 0.0;
  for (int a = 0; a < dim; ++a)
    for (const auto& [b, h] : rows[a]) {
      double hba = 0.0;
      for (const auto& [c, v] : rows[b])
        if (c == a) { hba = v; break; }
      worst = std::max(worst, std::abs(h - hba));
    }
  return worst;
}

SparseSym bosonic_hamiltonian(const ModeSet& modes, const FockBasis& basis,
                              double omega, double coupling) {
  require(modes.M == basis.M, 2, "toy: mode/basis size mismatch");
  require(std::isfinite(omega) && std::isfinite(coupling), 2,
          "toy: omega and coupling must be finite");
  const int M = modes.M;
  SparseSym H;
  H.dim = basis.dim();
  H.rows.resize(H.dim);

  std::vector<int> w(M), t(M);
  for (int a = 0; a < H.dim; ++a) {
    const std::vector<int>& v = basis.states[a];
    std::unordered_map<int, double> row;
    double diag = 0.0;
    for (int k = 0; k < M; ++k)
      diag += (modes.e[k] - omega * modes.m[k]) * v[k];
    row[a] += diag;

    // (coupling/2) V_{k l mm nn} a+_k a+_l a_nn a_mm
    for (int mm = 0; mm < M; ++mm) {
      if (v[mm] == 0) continue;
      for (int nn = 0; nn < M; ++nn) {
        int n_avail = v[nn] - (nn == mm ? 1 : 0);
        if (n_avail <= 0) continue;
        double amp1 = std::sqrt((double)v[mm]) * std::sqrt((double)n_avail);
        w = v;
        --w[mm];
        --w[nn];
        int S = mm + nn;
        for (int k = std::max(0, S - (M - 1)); k <= std::min(M - 1, S); ++k) {
          int l = S - k;
          double amp2 = std::sqrt((double)(w[l] + 1)) *
                        std::sqrt((double)(w[k] + 1 + (k == l ? 1 : 0)));
          t = w;
          ++t[l];
          ++t[k];
          int b = basis.index(t);
          row[b] += 0.5 * coupling * modes.v(k, l, mm, nn) * amp1 * amp2;
        }
      }
    }
    auto& out = H.rows[a];
    out.assign(row.begin(), row.end());
    std::sort(out.begin(), out.end());
  }
  return H;
}

SparseSym distinguishable_hamiltonian(const ModeSet& modes, int N,
                                      double omega, double coupling) {
  const int M = modes.M;
  require(N >= 1 && N <= 4 && M <= 6, 2,
          "toy: distinguishable solve limited to N <= 4, M <= 6");
  double dimd = std::pow((double)M, N);
  require(dimd <= (double)kDimCap, 2,
          "toy: distinguishable dimension exceeds the 2e5 cap");
  const int dim = (int)std::lround(dimd);

  SparseSym H;
  H.dim = dim;
  H.rows.resize(dim);
  std::vector<int> mode(N);
  for (int a = 0; a < dim; ++a) {
    int rest = a;
    for (int i = 0; i < N; ++i) {
      mode[i] = rest % M;
      rest /= M;
    }
    std::unordered_map<int, double> row;
    double diag = 0.0;
    for (int i = 0; i < N; ++i)
      diag += modes.e[mode[i]] - omega * modes.m[mode[i]];
    row[a] += diag;
    for (int i = 0; i < N; ++i)
      for (int j = i + 1; j < N; ++j) {
        int S = mode[i] + mode[j];
        for (int k = std::max(0, S - (M - 1)); k <= std::min(M - 1, S); ++k) {
          int l = S - k;
          int b = a + (k - mode[i]) * (int)std::lround(std::pow((double)M, i)) +
                  (l - mode[j]) * (int)std::lround(std::pow((double)M, j));
          row[b] += coupling * modes.v(k, l, mode[i], mode[j]);
        }
      }
    auto& out = H.rows[a];
    out.assign(row.begin(), row.end());
    std::sort(out.begin(), out.end());
  }
  return H;
}

EigPair lowest_eig_lanczos(const SparseSym& H, std::uint64_t seed,
                           double tol) {
  const int dim = H.dim;
  require(dim >= 1, 2, "toy: empty operator");
  EigPair out;
  if (dim == 1) {
    out.value = H.rows[0].empty() ? 0.0 : H.rows[0][0].second;
    out.vec = {1.0};
    out.residual = 0.0;
    out.converged = true;
    return out;
  }

  Rng rng(seed);
  std::vector<double> start(dim);
  for (double& x : start) x = rng.uniform(0.5, 1.5);

  const int kmax = std::min(dim, 220);
  std::vector<std::vector<double>> basis;
  std::vector<double> alpha, beta, w(dim), x(dim);
  auto norm = [&](const std::vector<double>& v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  };

  for (int round = 0; round < 12; ++round) {
    basis.clear();
    alpha.clear();
    beta.clear();
    double ns = norm(start);
    require(ns > 0, 4, "toy: zero Lanczos start vector");
    for (double& v : start) v /= ns;
    basis.push_back(start);

    for (int k = 0; k < kmax; ++k) {
      H.apply(basis[k].data(), w.data());
      double a = std::inner_product(basis[k].begin(), basis[k].end(),
                                    w.begin(), 0.0);
      alpha.push_back(a);
      // full reorthogonalization, two passes
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& q : basis) {
          double c = std::inner_product(q.begin(), q.end(), w.begin(), 0.0);
          for (int i = 0; i < dim; ++i) w[i] -= c * q[i];
        }
      double b = norm(w);
      out.iterations++;

      bool closing = (b < 1e-13) || (k == kmax - 1) || ((k + 1) % 10 == 0);
      if (closing) {
        int kk = (int)alpha.size();
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(kk, kk);
        for (int i = 0; i < kk; ++i) {
          T(i, i) = alpha[i];
          if (i + 1 < kk) T(i, i + 1) = T(i + 1, i) = beta[i];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
        Eigen::VectorXd s = es.eigenvectors().col(0);
        double theta = es.eigenvalues()(0);
        std::fill(x.begin(), x.end(), 0.0);
        for (int i = 0; i < kk; ++i)
          for (int d = 0; d < dim; ++d) x[d] += s(i) * basis[i][d];
        double nx = norm(x);
        for (double& v : x) v /= nx;
        std::vector<double> hx(dim);
        H.apply(x.data(), hx.data());
        double res = 0.0;
        for (int d = 0; d < dim; ++d) {
          double r = hx[d] - theta * x[d];
          res += r * r;
        }
        res = std::sqrt(res);
        out.value = theta;
        out.vec = x;
        out.residual = res;
        if (res <= tol || b < 1e-13) {
          out.converged = res <= tol;
          if (out.converged || b < 1e-13) return out;
        }
      }
      if (b < 1e-13) break;
      beta.push_back(b);
      for (double& v : w) v /= b;
      basis.push_back(w);
    }
    start = out.vec;  // thick restart from the best Ritz vector
  }
  return out;
}

EigPair lowest_eig_dense(const SparseSym& H) {
  require(H.dim <= kDenseCap, 2,
          "toy: dense diagonalization limited to dim <= 2000");
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(H.dim, H.dim);
  for (int a = 0; a < H.dim; ++a)
    for (const auto& [b, h] : H.rows[a]) A(a, b) = h;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  EigPair out;
  out.value = es.eigenvalues()(0);
  Eigen::VectorXd v = es.eigenvectors().col(0);
  out.vec.assign(v.data(), v.data() + H.dim);
  out.residual = 0.0;
  out.converged = true;
  return out;
}

double symmetric_overlap(int N, int M, const std::vector<double>& psi) {
  require((int)psi.size() == (int)std::lround(std::pow((double)M, N)), 2,
          "toy: vector size is not M^N");
  std::vector<int> perm(N);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> proj(psi.size(), 0.0);
  std::vector<int> mode(N);
  double nperm = 0.0;
  do {
    nperm += 1.0;
    for (size_t a = 0; a < psi.size(); ++a) {
      size_t rest = a;
      for (int i = 0; i < N; ++i) {
        mode[i] = (int)(rest % M);
        rest /= M;
      }
      size_t b = 0;
      for (int i = N - 1; i >= 0; --i) b = b * M + mode[perm[i]];
      proj[b] += psi[a];
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  double acc = 0.0;
  for (size_t a = 0; a < psi.size(); ++a) acc += psi[a] * proj[a] / nperm;
  return acc;
}

std::vector<double> one_rdm(const FockBasis& basis,
                            const std::vector<double>& psi) {
  require((int)psi.size() == basis.dim(), 2, "toy: vector/basis mismatch");
  const int M = basis.M;
  std::vector<double> g((size_t)M * M, 0.0);
  std::vector<int> t(M);
  for (int a = 0; a < basis.dim(); ++a) {
    const std::vector<int>& v = basis.states[a];
    double ca = psi[a];
    if (ca == 0.0) continue;
    for (int k = 0; k < M; ++k) g[(size_t)k * M + k] += ca * ca * v[k];
    for (int l = 0; l < M; ++l) {
      if (v[l] == 0) continue;
      for (int k = 0; k < M; ++k) {
        if (k == l) continue;
        t = v;
        --t[l];
        ++t[k];
        int b = basis.index(t);
        g[(size_t)k * M + l] +=
            psi[b] * ca * std::sqrt((double)v[l]) * std::sqrt((double)t[k]);
      }
    }
  }
  for (double& x : g) x /= basis.N;
  return g;
}

std::vector<double> sym_eigenvalues(const std::vector<double>& a, int mdim) {
  require((int)a.size() == mdim * mdim, 2, "sym_eigenvalues: size mismatch");
  Eigen::MatrixXd A(mdim, mdim);
  for (int i = 0; i < mdim; ++i)
    for (int j = 0; j < mdim; ++j) A(i, j) = a[(size_t)i * mdim + j];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  std::vector<double> ev(mdim);
  for (int i = 0; i < mdim; ++i) ev[i] = es.eigenvalues()(i);
  return ev;
}

ToyResult toy_solve(int N, int M, double omega, double coupling,
                    ToySolver solver, std::uint64_t seed) {
  require(std::isfinite(coupling) && coupling >= 0.0, 2,
          "toy: coupling must be >= 0");
  ModeSet modes = build_modes(M);
  FockBasis basis = fock_basis(N, M);

  auto ground = [&](const SparseSym& H, std::uint64_t s, EigPair& out,
                    double* mismatch) {
    if (solver == ToySolver::Dense) {
      out = lowest_eig_dense(H);
      return;
    }
    out = lowest_eig_lanczos(H, s, 1e-9);
    require(out.converged, 3, "toy: eigensolve did not converge");
    if (solver == ToySolver::Auto && H.dim <= 2000 && mismatch)
      *mismatch = std::abs(lowest_eig_dense(H).value - out.value);
  };

  ToyResult out;
  out.N = N;
  out.M = M;
  out.omega = omega;
  out.coupling = coupling;
  out.dim_bose = basis.dim();

  SparseSym Hb = bosonic_hamiltonian(modes, basis, omega, coupling);
  EigPair bose;
  ground(Hb, seed, bose, &out.dense_mismatch);
  out.e_bose = bose.value;
  out.bose_residual = bose.residual;

  SparseSym Hd = distinguishable_hamiltonian(modes, N, omega, coupling);
  out.dim_abs = Hd.dim;
  EigPair abs;
  ground(Hd, seed + 1, abs, nullptr);
  out.e_abs = abs.value;
  out.abs_residual = abs.residual;
  double overlap = symmetric_overlap(N, M, abs.vec);
  out.sector_label = overlap > 1.0 - 1e-8 ? "symmetric" : "non-symmetric";

  double mb = 0.0;
  for (int a = 0; a < basis.dim(); ++a) {
    int tm = 0;
    for (int k = 0; k < M; ++k) tm += k * basis.states[a][k];
    mb += bose.vec[a] * bose.vec[a] * tm;
  }
  out.total_m_bose = (int)std::lround(mb);
  double ma = 0.0;
  for (size_t a = 0; a < abs.vec.size(); ++a) {
    size_t rest = a;
    int tm = 0;
    for (int i = 0; i < N; ++i) {
      tm += (int)(rest % M);
      rest /= M;
    }
    ma += abs.vec[a] * abs.vec[a] * tm;
  }
  out.total_m_abs = (int)std::lround(ma);

  out.gap = out.e_bose - out.e_abs;
  out.rdm_eigenvalues = sym_eigenvalues(one_rdm(basis, bose.vec), M);
  out.converged = true;
  return out;
}

}  // namespace rotgas
