#pragma once
// Truncated-mode rotating many-body model: N bosons (or distinguishable
// particles) on the lowest 2D oscillator ladder, one radial orbital per
// angular momentum m = 0..M-1 with e_m = 2(m+1), contact interaction with
// exact total-angular-momentum conservation. Demonstrates the gap between
// the absolute and the bose-symmetric ground state under rotation at desk
// scale. The coupling is an effective parameter of the truncated model,
// not a scattering length.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace rotgas {

struct ModeSet {
  int M = 0;
  std::vector<int> m;       // angular momentum per mode (= mode index)
  std::vector<double> e;    // single-particle energy 2(m+1)
  std::vector<double> V;    // M^4 interaction tensor, conservation-sparse

  double v(int k, int l, int mm, int nn) const {
    return V[(((size_t)k * M + l) * M + mm) * M + nn];
  }
};

// Interaction entries by radial quadrature of the mode-function products;
// entries with m1 + m2 != m3 + m4 vanish identically, and the tensor is
// exactly symmetric under k<->l, m<->n and (kl)<->(mn) by construction.
ModeSet build_modes(int M);

// Closed-form oracle S! / (2 pi 2^S sqrt(k! l! m! n!)), S = k+l = m+n.
double mode_interaction_reference(int k, int l, int mm, int nn);

struct FockBasis {
  int N = 0;
  int M = 0;
  std::vector<std::vector<int>> states;  // lexicographic occupation vectors
  std::unordered_map<std::uint64_t, int> lookup;

  static std::uint64_t key(const std::vector<int>& occ);
  int dim() const { return (int)states.size(); }
  int index(const std::vector<int>& occ) const;
};

FockBasis fock_basis(int N, int M);

// Sparse symmetric operator stored by rows.
struct SparseSym {
  int dim = 0;
  std::vector<std::vector<std::pair<int, double>>> rows;

  void apply(const double* x, double* y) const;
  double hermiticity_defect() const;  // max |H_ab - H_ba|
};

// Second-quantized  sum_k (e_k - Omega m_k) n_k
//                 + (coupling/2) sum V_{klmn} a+_k a+_l a_n a_m.
SparseSym bosonic_hamiltonian(const ModeSet& modes, const FockBasis& basis,
                              double omega, double coupling);

// Distinguishable N-particle space (dimension M^N, index sum m_i M^i):
// sum_i h(m_i) + coupling * sum_{i<j} v(i,j).
SparseSym distinguishable_hamiltonian(const ModeSet& modes, int N,
                                      double omega, double coupling);

struct EigPair {
  double value = 0.0;
  std::vector<double> vec;
  double residual = 0.0;
  std::int64_t iterations = 0;
  bool converged = false;
};

// Lowest eigenpair by Lanczos with full reorthogonalization and thick
// restarts; deterministic start from the seed. residual = ||Hx - theta x||.
EigPair lowest_eig_lanczos(const SparseSym& H, std::uint64_t seed,
                           double tol = 1e-9);

// Dense cross-check (dim <= 2000).
EigPair lowest_eig_dense(const SparseSym& H);

// <psi|P_sym|psi> for a unit vector on the distinguishable space.
double symmetric_overlap(int N, int M, const std::vector<double>& psi);

// One-particle reduced density matrix <a+_k a_l>/N (row-major M x M).
std::vector<double> one_rdm(const FockBasis& basis,
                            const std::vector<double>& psi);

// Eigenvalues of a small symmetric matrix, ascending (RDM diagnostics).
std::vector<double> sym_eigenvalues(const std::vector<double>& a, int mdim);

enum class ToySolver : int { Auto = 0, Dense = 1, Lanczos = 2 };

struct ToyResult {
  int N = 0;
  int M = 0;
  double omega = 0.0;
  double coupling = 0.0;
  double e_bose = 0.0;
  double e_abs = 0.0;
  double gap = 0.0;  // e_bose - e_abs >= 0 up to solver tolerance
  std::string sector_label;  // symmetry sector of the absolute ground state
  std::vector<double> rdm_eigenvalues;  // of the bosonic ground state
  int total_m_bose = 0;  // <sum_k m_k n_k> of the bosonic ground, rounded
  int total_m_abs = 0;
  double bose_residual = 0.0;
  double abs_residual = 0.0;
  double dense_mismatch = -1.0;  // |iterative - dense|, -1 if dense skipped
  int dim_bose = 0;
  int dim_abs = 0;
  bool converged = false;
};

ToyResult toy_solve(int N, int M, double omega, double coupling,
                    ToySolver solver = ToySolver::Auto,
                    std::uint64_t seed = 7777);

}  // namespace rotgas
