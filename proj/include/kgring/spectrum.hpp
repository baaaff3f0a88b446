#pragma once

#include <array>
#include <memory>
#include <string>
#include <utility>

#include "kgring/config.hpp"

namespace kgring {

// Dense A_v in the Fourier layout (phi(-N..N), pi(-N..N), r1, r2).
struct TruncatedOperator {
  int N = 0;
  MatC A;
  int dim() const { return static_cast<int>(A.rows()); }
};

TruncatedOperator build_operator(const Coupling& coupling, const PotentialProfile& v, int N);

// Same operator in the real basis of realbasis::; a real matrix.
MatR build_real_operator(const Coupling& coupling, const PotentialProfile& v, int N);

// Pieces of the real-basis operator: H = -(k^2+1) - v and the coupling
// columns beta(:, i) = coordinates of alpha_i.
struct RealBlocks {
  int N = 0;
  MatR H;
  MatR beta;  // (2N+1) x 2
  VecR h;     // eigenvalues of H, descending
  MatR U;     // matching orthonormal eigenvectors
  MatR gamma; // U^T beta
};
RealBlocks real_blocks(const Coupling& coupling, const PotentialProfile& v, int N);

// Fourier -> real-basis unitary, (2N+1) x (2N+1).
MatC fourier_to_real(int N);

struct DenseEigenpair {
  cplx lambda;
  VecC vector;
};
std::vector<DenseEigenpair> dense_eigensolve(const TruncatedOperator& op, int max_dim = 200);
std::vector<DenseEigenpair> dense_eigensolve(const MatC& A, int max_dim = 200);

Eigen::Matrix2cd secular_matrix(cplx lambda, const Coupling& coupling, const PotentialProfile& v,
                                int N);
Eigen::Matrix2cd secular_matrix(cplx lambda, const RealBlocks& blocks);

enum class ModeKind { Oscillatory, Bath };

struct ModeLabel {
  ModeKind kind = ModeKind::Oscillatory;
  int n = 0;       // oscillatory wavenumber label
  int branch = 1;  // +1 / -1 (sign of Im lambda)
  int bath = 0;    // 1 or 2 for bath modes
  int level() const { return kind == ModeKind::Bath ? -1 : std::abs(n); }
  std::string str() const;
  bool operator==(const ModeLabel&) const = default;
};

struct EigenMode {
  ModeLabel label;
  cplx lambda, epsilon, pairing;
  CoeffSeq e_pi, e_phi, f_pi;
  std::array<cplx, 2> e_r{}, f_r{};
  double residual = 0.0;

  // Real-basis coordinates; f_phi = H conj(pi)/conj(lambda), f_pi = conj(pi).
  VecC pi, phi, f_phi;

  // Full vectors in the real-basis layout (phi, pi, r).
  VecC right() const;
  VecC left() const;
};

struct Spectrum {
  int N = 0;
  PotentialProfile v;
  Coupling coupling;
  RealBlocks blocks;
  std::vector<EigenMode> modes;
  std::vector<int> conj_index;  // modes[conj_index[i]] ~ conj(modes[i])

  int dim() const { return static_cast<int>(modes.size()); }
  int index_of(const ModeLabel& l) const;
};

// Both roots of the oscillatory secular condition at level |n| on one branch;
// labels (+n, branch) and (-n, branch) (just one mode for n = 0).
std::vector<EigenMode> solve_level(int level, int branch, const RealBlocks& blocks,
                                   const Coupling& coupling, double root_tol);
EigenMode solve_mode(int n, int branch, const Coupling& coupling, const PotentialProfile& v,
                     int N, double root_tol = 1e-10);
std::array<EigenMode, 2> solve_bath_modes(const RealBlocks& blocks, double root_tol = 1e-10);
std::array<EigenMode, 2> solve_bath_modes(const Coupling& coupling, const PotentialProfile& v,
                                          int N, double root_tol = 1e-10);

// Order: bath 1, bath 2, (0,+), (0,-), then for n = 1..N:
// (n,+), (n,-), (-n,+), (-n,-).
Spectrum compute_spectrum(const Coupling& coupling, const PotentialProfile& v, int N,
                          double root_tol = 1e-10, int width = 1);

// <f, e> from the full component vectors.
cplx pairing(const EigenMode& mode);
// The same quantity through the pi components only.
cplx pairing_from_pi(const EigenMode& mode, const RealBlocks& blocks);
// <f_m, e_n> for two modes.
cplx cross_pairing(const EigenMode& f, const EigenMode& e);

// P_{phi(x), r_i} on the grid.
std::array<GridFunction, 2> projection_entry_phi_r(const EigenMode& mode, int M);

// P_{phi(x), pi(z)} = e_phi(x) f_pi^*(z) / <f, e>.
struct PhiPiKernel {
  CoeffSeq e_phi, e_pi;
  cplx pairing;
  cplx operator()(double x, double z) const;
  MatC on_grid(int M) const;
};
PhiPiKernel projection_entry_phi_pi(const EigenMode& mode);

// Residual ||A e - lambda e|| in the real basis.
double mode_residual(const EigenMode& mode, const RealBlocks& blocks);

}  // namespace kgring
