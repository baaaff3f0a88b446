#include "kgring/covariance.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "kgring/summation.hpp"

namespace kgring {

MatR diffusion_matrix(int N, const Temperatures& temps) {
  const int n = 2 * N + 1;
  MatR Q = MatR::Zero(2 * n + 2, 2 * n + 2);
  Q(2 * n, 2 * n) = 2 * temps.T1;
  Q(2 * n + 1, 2 * n + 1) = 2 * temps.T2;
  return Q;
}

ModeCovariance mode_covariance(const Spectrum& sp, const Temperatures& temps) {
  const int d = sp.dim();
  // Neutral modes are allowed only if the noise cannot reach them.
  for (auto& m : sp.modes)
    if (!(m.lambda.real() < 0) && std::abs(m.f_r[0]) + std::abs(m.f_r[1]) > 0)
      throw DomainError("non-dissipative mode " + m.label.str() + " (Re lambda >= 0)");
  // Only the r-components of f see the noise.
  MatC F(2, d);
  for (int j = 0; j < d; ++j) {
    F(0, j) = sp.modes[j].f_r[0];
    F(1, j) = sp.modes[j].f_r[1];
  }
  const double q[2] = {2 * temps.T1, 2 * temps.T2};
  ModeCovariance mc;
  mc.temps = temps;
  mc.S.resize(d, d);
  mc.St.resize(d, d);
  for (int m = 0; m < d; ++m)
    for (int n = 0; n < d; ++n) {
      const cplx fQf = std::conj(F(0, n)) * q[0] * F(0, m) + std::conj(F(1, n)) * q[1] * F(1, m);
      const cplx den = std::conj(sp.modes[m].lambda) + sp.modes[n].lambda;
      mc.S(m, n) = fQf == cplx(0) ? cplx(0) : -fQf / den;
      mc.St(m, n) = mc.S(m, n) / (std::conj(sp.modes[m].pairing) * sp.modes[n].pairing);
    }
  return mc;
}

MatC full_covariance(const Spectrum& sp, const ModeCovariance& mc) {
  const int d = sp.dim();
  MatC V(d, d);
  for (int j = 0; j < d; ++j) V.col(j) = sp.modes[j].right();
  // Sigma = sum_{m,n} e_n St(m,n) e_m^dagger = V St^T V^dagger
  return V * mc.St.transpose() * V.adjoint();
}

MatC to_fourier_layout(const MatC& S, int N) {
  const int n = 2 * N + 1;
  MatC T = fourier_to_real(N);
  MatC Tf = MatC::Identity(2 * n + 2, 2 * n + 2);
  Tf.block(0, 0, n, n) = T;
  Tf.block(n, n, n, n) = T;
  return Tf.adjoint() * S * Tf;
}

MatC solve_lyapunov(const MatC& A, const MatC& Q) {
  const int d = static_cast<int>(A.rows());
  Eigen::ComplexSchur<MatC> cs(A);
  if (cs.info() != Eigen::Success) throw ConvergenceError("Schur decomposition failed");
  const MatC& U = cs.matrixU();
  const MatC& T = cs.matrixT();
  MatC C = -U.adjoint() * Q * U;
  MatC X = MatC::Zero(d, d);
  double closest = INFINITY;
  for (int i = 0; i < d; ++i) closest = std::min(closest, std::abs(T(i, i).real()));
  for (int j = d - 1; j >= 0; --j) {
    VecC rhs = C.col(j);
    for (int k = j + 1; k < d; ++k) rhs -= std::conj(T(j, k)) * X.col(k);
    // Back substitution with (T + conj(T_jj) I). A zero pivot is tolerated only
    // when the right-hand side vanishes there too (undriven neutral modes).
    const double tiny = 1e-14 * std::max(1.0, T.norm());
    for (int i = d - 1; i >= 0; --i) {
      cplx s = rhs(i);
      for (int k = i + 1; k < d; ++k) s -= T(i, k) * X(k, j);
      const cplx piv = T(i, i) + std::conj(T(j, j));
      if (std::abs(piv) < tiny) {
        if (std::abs(s) < tiny) {
          X(i, j) = 0;
          continue;
        }
        std::ostringstream os;
        os << "Lyapunov system singular; eigenvalue closest to the imaginary axis has |Re| = "
           << closest;
        throw DomainError(os.str());
      }
      X(i, j) = s / piv;
    }
  }
  MatC S = U * X * U.adjoint();
  return 0.5 * (S + S.adjoint());
}

MatC solve_lyapunov_kronecker(const MatC& A, const MatC& Q) {
  const int d = static_cast<int>(A.rows());
  if (d > 40) throw DomainError("Kronecker Lyapunov solve limited to d <= 40");
  const int D = d * d;
  MatC K = MatC::Zero(D, D);
  // column-major vec: vec(A X) = (I kron A) vec X, vec(X A^dag) = (conj(A) kron I) vec X
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) {
      const int row = j * d + i;
      for (int k = 0; k < d; ++k) {
        K(row, j * d + k) += A(i, k);
        K(row, k * d + i) += std::conj(A(j, k));
      }
    }
  VecC q(D);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) q(j * d + i) = -Q(i, j);
  VecC x = K.partialPivLu().solve(q);
  MatC X(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) X(i, j) = x(j * d + i);
  return X;
}

MatC lyapunov_oracle(const TruncatedOperator& op, const Temperatures& temps) {
  return solve_lyapunov(op.A, diffusion_matrix(op.N, temps).cast<cplx>());
}

CovarianceField::CovarianceField(const Spectrum& sp, const ModeCovariance& mc, int M)
    : sp_(&sp), mc_(&mc), M_(M) {
  const int N = sp.N, d = sp.dim();
  MatR B = realbasis::grid_matrix(N, M);
  MatC Phi(2 * N + 1, d), Pim(2 * N + 1, d);
  for (int j = 0; j < d; ++j) {
    Phi.col(j) = sp.modes[j].phi;
    Pim.col(j) = sp.modes[j].pi;
  }
  E_ = B.cast<cplx>() * Phi;
  Pi_ = B.cast<cplx>() * Pim;
  K_ = E_.conjugate() * mc.St;

  // Diagonal, plus the same sum truncated at N/2 and N/4 for the tail estimate.
  auto partial_diag = [&](int L) {
    const int c = std::min(d, modes_up_to_level(L));
    VecC out(M);
    for (int x = 0; x < M; ++x) {
      NeumaierC acc;
      for (int n = 0; n < c; ++n) {
        cplx kn = 0;
        for (int m = 0; m < c; ++m) kn += std::conj(E_(x, m)) * mc.St(m, n);
        acc.add(kn * E_(x, n));
      }
      out(x) = acc.value();
    }
    return out;
  };
  diag_.values.resize(M);
  for (int x = 0; x < M; ++x) {
    NeumaierC acc;
    for (int n = 0; n < d; ++n) acc.add(K_(x, n) * E_(x, n));
    diag_.values[x] = acc.value();
  }
  if (N >= 4) {
    VecC full = Eigen::Map<VecC>(diag_.values.data(), M);
    VecC half = partial_diag(N / 2), quarter = partial_diag(N / 4);
    const double d0 = (full - half).cwiseAbs().maxCoeff();
    const double d1 = (half - quarter).cwiseAbs().maxCoeff();
    const double r = d1 > 0 ? d0 / d1 : 0.0;
    tail_ = r < 1 ? d0 * r / (1 - r) : 10 * d0;
  }
}

cplx CovarianceField::operator()(double x, double y, double t) const {
  return space_time_covariance(*sp_, *mc_, x, y, t);
}

MatC CovarianceField::equal_time_grid() const { return K_ * E_.transpose(); }

GridFunction equal_time_diag(const Spectrum& sp, const ModeCovariance& mc, int M) {
  CovarianceField f(sp, mc, M);
  for (auto z : f.diag().values)
    if (!(z.real() > 0))
      throw ConvergenceError("equal-time variance not positive on the grid (tail failure)");
  return f.diag();
}

namespace {
VecC phi_at(const Spectrum& sp, double x) {
  VecR b = realbasis::at(sp.N, x);
  VecC out(sp.dim());
  for (int j = 0; j < sp.dim(); ++j) out(j) = b.cast<cplx>().dot(sp.modes[j].phi);
  return out;
}
VecC pi_at(const Spectrum& sp, double x) {
  VecR b = realbasis::at(sp.N, x);
  VecC out(sp.dim());
  for (int j = 0; j < sp.dim(); ++j) out(j) = b.cast<cplx>().dot(sp.modes[j].pi);
  return out;
}
}  // namespace

cplx space_time_covariance(const Spectrum& sp, const ModeCovariance& mc, double x, double y,
                           double t) {
  if (t < 0) throw DomainError("space_time_covariance needs t >= 0");
  VecC ex = phi_at(sp, x), ey = phi_at(sp, y);
  NeumaierC acc;
  for (int n = 0; n < sp.dim(); ++n) {
    cplx kn = 0;
    for (int m = 0; m < sp.dim(); ++m) kn += std::conj(ex(m)) * mc.St(m, n);
    acc.add(kn * std::exp(t * sp.modes[n].lambda) * ey(n));
  }
  return acc.value();
}

cplx propagator(const Spectrum& sp, double x, double t, double z) {
  if (!(t > 0)) throw DomainError("propagator is evaluated for t > 0 only");
  VecC ex = phi_at(sp, x), pz = pi_at(sp, z);
  NeumaierC acc;
  for (int n = 0; n < sp.dim(); ++n)
    acc.add(std::exp(t * sp.modes[n].lambda) * ex(n) * pz(n) / sp.modes[n].pairing);
  return acc.value();
}

}  // namespace kgring
