#pragma once

#include "kgring/spectrum.hpp"

namespace kgring {

// Noise enters the bath variables as sqrt(2 T_i) dW_i, so the diffusion
// matrix is Q = diag(0, ..., 0, 2 T1, 2 T2) and the equal-temperature
// stationary law has phi-variances T/(k^2+1).
MatR diffusion_matrix(int N, const Temperatures& temps);

struct ModeCovariance {
  // S(m, n) = E[conj(a_m) a_n] with a_n = <f_n, Phi>,
  //         = -<f_n, Q f_m> / (conj(lambda_m) + lambda_n)
  MatC S;
  // S(m, n) / (conj(pairing_m) pairing_n): the weight of conj(e_m) e_n in C.
  MatC St;
  Temperatures temps;
};

ModeCovariance mode_covariance(const Spectrum& sp, const Temperatures& temps);

// Full stationary covariance E[Phi Phi^dagger] from the mode sum (real-basis layout).
MatC full_covariance(const Spectrum& sp, const ModeCovariance& mc);

// Real-basis layout -> Fourier layout of TruncatedOperator.
MatC to_fourier_layout(const MatC& sigma_real, int N);

// A X + X A^dagger + Q = 0 by complex Schur (Bartels-Stewart).
MatC solve_lyapunov(const MatC& A, const MatC& Q);
// Same equation through the d^2 x d^2 Kronecker system; tiny d only.
MatC solve_lyapunov_kronecker(const MatC& A, const MatC& Q);
// Fourier layout, from the dense operator.
MatC lyapunov_oracle(const TruncatedOperator& op, const Temperatures& temps);

// Number of leading modes (in spectrum order) whose level is <= L.
inline int modes_up_to_level(int L) { return 4 + 4 * L; }

class CovarianceField {
 public:
  CovarianceField(const Spectrum& sp, const ModeCovariance& mc, int M);

  // C(x, y, t) = E[phi(x) phi_t(y)], t >= 0, compensated mode sum.
  cplx operator()(double x, double y, double t = 0.0) const;
  // Equal-time covariance on the M x M grid.
  MatC equal_time_grid() const;

  const GridFunction& diag() const { return diag_; }
  double tail_bound() const { return tail_; }
  int M() const { return M_; }

  // Grid values (M x d) of e_phi, e_pi, and K_n(z) = sum_m conj(E_m(z)) St(m, n).
  const MatC& E() const { return E_; }
  const MatC& Pi() const { return Pi_; }
  const MatC& K() const { return K_; }
  const Spectrum& spectrum() const { return *sp_; }
  const ModeCovariance& modes() const { return *mc_; }

 private:
  const Spectrum* sp_;
  const ModeCovariance* mc_;
  int M_;
  MatC E_, Pi_, K_;
  GridFunction diag_;
  double tail_ = 0.0;
};

GridFunction equal_time_diag(const Spectrum& sp, const ModeCovariance& mc, int M);
cplx space_time_covariance(const Spectrum& sp, const ModeCovariance& mc, double x, double y,
                           double t);

// D(x, t; z) = sum_n e^{t lambda_n} e_phi,n(x) e_pi,n(z) / <f_n, e_n>, t > 0.
cplx propagator(const Spectrum& sp, double x, double t, double z);

}  // namespace kgring
