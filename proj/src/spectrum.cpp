#include "kgring/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "kgring/parallel.hpp"

namespace kgring {

namespace {

const cplx I(0, 1);

void require_ball(const PotentialProfile& v) {
  if (!v.in_ball()) {
    std::ostringstream os;
    os << "potential outside the admissible ball: |v|_C = " << v.sup_norm << " > "
       << v.ball_radius;
    throw DomainError(os.str());
  }
}

MatC potential_matrix_fourier(const PotentialProfile& v, int N) {
  const int n = 2 * N + 1;
  const double s = 1.0 / std::sqrt(kTwoPi);
  MatC V = MatC::Zero(n, n);
  const int B = v.vhat.N();
  for (int k = -N; k <= N; ++k)
    for (int l = -N; l <= N; ++l)
      if (std::abs(k - l) <= B) V(k + N, l + N) = v.vhat(k - l) * s;
  return V;
}

MatC hamiltonian_fourier(const PotentialProfile& v, int N) {
  MatC H = -potential_matrix_fourier(v, N);
  for (int k = -N; k <= N; ++k) H(k + N, k + N) -= double(k) * k + 1.0;
  return H;
}

}  // namespace

MatC fourier_to_real(int N) {
  const int n = 2 * N + 1;
  const double r = 1.0 / std::sqrt(2.0);
  MatC T = MatC::Zero(n, n);
  T(0, N) = 1.0;
  for (int k = 1; k <= N; ++k) {
    T(2 * k - 1, N + k) = r;
    T(2 * k - 1, N - k) = r;
    T(2 * k, N + k) = I * r;
    T(2 * k, N - k) = -I * r;
  }
  return T;
}

TruncatedOperator build_operator(const Coupling& coupling, const PotentialProfile& v, int N) {
  require_ball(v);
  const int n = 2 * N + 1;
  TruncatedOperator op;
  op.N = N;
  op.A = MatC::Zero(2 * n + 2, 2 * n + 2);
  op.A.block(0, n, n, n) = MatC::Identity(n, n);
  op.A.block(n, 0, n, n) = hamiltonian_fourier(v, N);
  for (int k = -N; k <= N; ++k) {
    auto a = coupling.at(k);
    for (int i = 0; i < 2; ++i) {
      op.A(n + k + N, 2 * n + i) = -a[i];
      op.A(2 * n + i, n + k + N) = std::conj(a[i]);
    }
  }
  op.A(2 * n, 2 * n) = -1.0;
  op.A(2 * n + 1, 2 * n + 1) = -1.0;
  return op;
}

RealBlocks real_blocks(const Coupling& coupling, const PotentialProfile& v, int N) {
  require_ball(v);
  const int n = 2 * N + 1;
  MatC T = fourier_to_real(N);
  RealBlocks b;
  b.N = N;
  MatC Hc = T * hamiltonian_fourier(v, N) * T.adjoint();
  b.H = Hc.real();
  b.H = 0.5 * (b.H + b.H.transpose()).eval();
  b.beta.resize(n, 2);
  CoeffSeq a1 = coupling.alpha1.resized(N), a2 = coupling.alpha2.resized(N);
  b.beta.col(0) = realbasis::from_fourier(a1).real();
  b.beta.col(1) = realbasis::from_fourier(a2).real();

  Eigen::SelfAdjointEigenSolver<MatR> es(b.H);
  if (es.info() != Eigen::Success) throw ConvergenceError("symmetric eigensolve failed");
  // Eigen sorts ascending; we want descending (level 0 first).
  b.h = es.eigenvalues().reverse();
  b.U = es.eigenvectors().rowwise().reverse();
  b.gamma = b.U.transpose() * b.beta;
  return b;
}

MatR build_real_operator(const Coupling& coupling, const PotentialProfile& v, int N) {
  RealBlocks b = real_blocks(coupling, v, N);
  const int n = 2 * N + 1;
  MatR A = MatR::Zero(2 * n + 2, 2 * n + 2);
  A.block(0, n, n, n) = MatR::Identity(n, n);
  A.block(n, 0, n, n) = b.H;
  A.block(n, 2 * n, n, 2) = -b.beta;
  A.block(2 * n, n, 2, n) = b.beta.transpose();
  A(2 * n, 2 * n) = -1.0;
  A(2 * n + 1, 2 * n + 1) = -1.0;
  return A;
}

std::vector<DenseEigenpair> dense_eigensolve(const TruncatedOperator& op, int max_dim) {
  return dense_eigensolve(op.A, max_dim);
}

std::vector<DenseEigenpair> dense_eigensolve(const MatC& A, int max_dim) {
  if (A.rows() > max_dim)
    throw DomainError("dense oracle limited to d <= " + std::to_string(max_dim));
  Eigen::ComplexEigenSolver<MatC> es(A, true);
  if (es.info() != Eigen::Success)
    throw ConvergenceError("dense eigensolve did not converge",
                           {"QR iterations exhausted at d=" + std::to_string(A.rows())});
  std::vector<DenseEigenpair> out;
  const double scale = std::max(1.0, A.norm());
  for (int i = 0; i < A.rows(); ++i) {
    VecC v = es.eigenvectors().col(i);
    v /= v.norm();
    cplx l = es.eigenvalues()(i);
    double res = (A * v - l * v).norm();
    if (res > 1e-9 * scale)
      throw ConvergenceError("dense eigenpair residual too large",
                             {"index " + std::to_string(i) + " residual " + std::to_string(res)});
    out.push_back({l, v});
  }
  return out;
}

Eigen::Matrix2cd secular_matrix(cplx lambda, const RealBlocks& b) {
  const cplx l2 = lambda * lambda;
  double dist = INFINITY;
  Eigen::Matrix2cd G = Eigen::Matrix2cd::Zero();
  for (int q = 0; q < b.h.size(); ++q) {
    cplx a = b.h(q) - l2;
    dist = std::min(dist, std::abs(a));
    Eigen::Vector2d u = b.gamma.row(q).transpose();
    G += (u * u.transpose()).cast<cplx>() / a;
  }
  if (dist < 1e-12 * std::max(1.0, std::abs(l2))) {
    std::ostringstream os;
    os << "resolvent near-singular: lambda^2 is " << dist << " from an eigenvalue of H";
    throw DomainError(os.str());
  }
  return G;
}

Eigen::Matrix2cd secular_matrix(cplx lambda, const Coupling& coupling, const PotentialProfile& v,
                                int N) {
  return secular_matrix(lambda, real_blocks(coupling, v, N));
}

std::string ModeLabel::str() const {
  if (kind == ModeKind::Bath) return "bath" + std::to_string(bath);
  return "(" + std::to_string(n) + (branch > 0 ? ",+)" : ",-)");
}

namespace {

using Fn = std::function<cplx(cplx)>;

bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

std::string fmt(int it, cplx z, cplx f) {
  std::ostringstream os;
  os.precision(16);
  os << "it " << it << " z=" << z << " |f|=" << std::abs(f);
  return os.str();
}

bool newton(const Fn& f, cplx& z, std::vector<std::string>& trace, int maxit = 80) {
  cplx fz = f(z);
  for (int it = 0; it < maxit; ++it) {
    trace.push_back(fmt(it, z, fz));
    if (fz == cplx(0)) return true;
    const double h = 1e-6 * (1 + std::abs(z));
    cplx d = (f(z + h) - f(z - h)) / (2 * h);
    if (!finite(d) || d == cplx(0)) return false;
    cplx step = fz / d;
    const double full = std::abs(step);
    cplx zn = z - step, fn = f(zn);
    for (int k = 0; k < 40 && !(std::abs(fn) <= std::abs(fz)); ++k) {
      step *= 0.5;
      zn = z - step;
      fn = f(zn);
    }
    if (!finite(fn)) return false;
    z = zn;
    fz = fn;
    if (full <= 1e-14 * (1 + std::abs(z))) return true;
  }
  return false;
}

bool secant(const Fn& f, cplx& z, std::vector<std::string>& trace, int maxit = 100) {
  cplx z0 = z, z1 = z * (1.0 + 1e-5) + 1e-7;
  cplx f0 = f(z0), f1 = f(z1);
  for (int it = 0; it < maxit; ++it) {
    trace.push_back("secant " + fmt(it, z1, f1));
    if (f1 == f0) break;
    cplx z2 = z1 - f1 * (z1 - z0) / (f1 - f0);
    if (!finite(z2)) return false;
    z0 = z1;
    f0 = f1;
    z1 = z2;
    f1 = f(z1);
    if (std::abs(z1 - z0) <= 1e-14 * (1 + std::abs(z1))) {
      z = z1;
      return true;
    }
  }
  return false;
}

cplx find_root(const Fn& f, cplx seed, const std::string& what) {
  std::vector<std::string> trace;
  cplx z = seed;
  if (newton(f, z, trace)) return z;
  z = seed;
  if (secant(f, z, trace)) return z;
  throw ConvergenceError("root search failed for " + what, trace);
}

cplx eps_of(cplx l) { return l / (l + 1.0); }

double coupling_floor(const RealBlocks& b) {
  return 1e-14 * std::max(1.0, b.gamma.cwiseAbs().maxCoeff());
}

bool coupled(const RealBlocks& b, int q) { return b.gamma.row(q).norm() > coupling_floor(b); }

Eigen::Matrix2cd G_excluding(cplx l, const RealBlocks& b, const std::vector<int>& skip) {
  const cplx l2 = l * l;
  Eigen::Matrix2cd G = Eigen::Matrix2cd::Zero();
  for (int q = 0; q < b.h.size(); ++q) {
    if (std::find(skip.begin(), skip.end(), q) != skip.end() || !coupled(b, q)) continue;
    Eigen::Vector2d u = b.gamma.row(q).transpose();
    G += (u * u.transpose()).cast<cplx>() / (b.h(q) - l2);
  }
  return G;
}

cplx adj_form(const Eigen::Matrix2cd& R, const Eigen::Vector2d& u) {
  return u(0) * u(0) * R(1, 1) + u(1) * u(1) * R(0, 0) - u(0) * u(1) * (R(0, 1) + R(1, 0));
}

// det(I - eps G) times prod_{q in poles}(h_q - lambda^2), pole-free near the level.
cplx level_det(cplx l, const RealBlocks& b, const std::vector<int>& poles) {
  const cplx e = eps_of(l), l2 = l * l;
  Eigen::Matrix2cd R = Eigen::Matrix2cd::Identity() - e * G_excluding(l, b, poles);
  const cplx detR = R.determinant();
  if (poles.size() == 1) {
    Eigen::Vector2d u = b.gamma.row(poles[0]).transpose();
    return (b.h(poles[0]) - l2) * detR - e * adj_form(R, u);
  }
  Eigen::Vector2d u1 = b.gamma.row(poles[0]).transpose(), u2 = b.gamma.row(poles[1]).transpose();
  const cplx a1 = b.h(poles[0]) - l2, a2 = b.h(poles[1]) - l2;
  const double cross = u1(0) * u2(1) - u1(1) * u2(0);
  return a1 * a2 * detR - e * (a2 * adj_form(R, u1) + a1 * adj_form(R, u2)) +
         e * e * cross * cross;
}

// Roots in s = lambda^2 of level_det with eps and R frozen at lambda.
std::vector<cplx> frozen_roots(cplx l, const RealBlocks& b, const std::vector<int>& poles) {
  const cplx e = eps_of(l);
  Eigen::Matrix2cd R = Eigen::Matrix2cd::Identity() - e * G_excluding(l, b, poles);
  const cplx detR = R.determinant();
  if (poles.size() == 1) {
    Eigen::Vector2d u = b.gamma.row(poles[0]).transpose();
    return {b.h(poles[0]) - e * adj_form(R, u) / detR};
  }
  Eigen::Vector2d u1 = b.gamma.row(poles[0]).transpose(), u2 = b.gamma.row(poles[1]).transpose();
  const double h1 = b.h(poles[0]), h2 = b.h(poles[1]);
  const cplx p1 = adj_form(R, u1), p2 = adj_form(R, u2);
  const double cross = u1(0) * u2(1) - u1(1) * u2(0);
  const cplx A = detR, B = -(h1 + h2) * detR + e * (p1 + p2),
             C = h1 * h2 * detR - e * (h2 * p1 + h1 * p2) + e * e * cross * cross;
  const cplx disc = std::sqrt(B * B - 4.0 * A * C);
  const cplx q = -0.5 * (B + (std::real(std::conj(B) * disc) >= 0 ? disc : -disc));
  return {q / A, C / q};
}

cplx lambda_from_s(cplx s, int branch) {
  cplx r = std::sqrt(s);
  return (r.imag() * branch >= 0) ? r : -r;
}

// Kernel vector of a 2x2 matrix from its larger row.
Eigen::Vector2cd kernel2(const Eigen::Matrix2cd& K) {
  Eigen::Vector2cd c;
  if (K.row(0).norm() >= K.row(1).norm())
    c << K(0, 1), -K(0, 0);
  else
    c << K(1, 1), -K(1, 0);
  if (c.norm() == 0) c << 1, 0;
  return c / c.norm();
}

void fix_phase_by_fourier(VecC& pi, int N) {
  CoeffSeq c = realbasis::to_fourier(pi, N);
  int best = -N;
  double m = -1;
  for (int k = -N; k <= N; ++k)
    if (std::abs(c(k)) > m * (1 + 1e-12)) {
      m = std::abs(c(k));
      best = k;
    }
  if (m > 0) pi *= std::conj(c(best)) / m;
}

EigenMode assemble(const ModeLabel& label, cplx l, VecC pi, const std::array<cplx, 2>* bath_er,
                   const RealBlocks& b) {
  const int N = b.N;
  EigenMode m;
  m.label = label;
  m.lambda = l;
  m.epsilon = (l == cplx(-1.0)) ? cplx(INFINITY) : eps_of(l);
  if (bath_er) {
    m.e_r = *bath_er;
  } else {
    pi /= pi.norm();
    fix_phase_by_fourier(pi, N);
    Eigen::Vector2cd er = b.beta.transpose().cast<cplx>() * pi / (l + 1.0);
    m.e_r = {er(0), er(1)};
  }
  m.pi = pi;
  m.phi = pi / l;
  m.f_phi = b.H.cast<cplx>() * pi.conjugate() / std::conj(l);
  m.f_r = {-std::conj(m.e_r[0]), -std::conj(m.e_r[1])};
  m.e_pi = realbasis::to_fourier(m.pi, N);
  m.e_phi = realbasis::to_fourier(m.phi, N);
  m.f_pi = realbasis::to_fourier(VecC(m.pi.conjugate()), N);
  m.pairing = pairing(m);
  m.residual = mode_residual(m, b);
  return m;
}

}  // namespace

std::vector<EigenMode> solve_level(int level, int branch, const RealBlocks& b,
                                   const Coupling& /*coupling*/, double root_tol) {
  const int N = b.N;
  if (level < 0 || level > N) throw DomainError("level outside truncation");
  std::vector<int> poles;
  if (level == 0)
    poles = {0};
  else
    poles = {2 * level - 1, 2 * level};

  std::vector<int> live, dead;
  for (int q : poles) (coupled(b, q) ? live : dead).push_back(q);

  struct Root {
    cplx lambda;
    VecC pi;
    double overlap;  // with the dominant coupling direction
  };
  std::vector<Root> roots;

  for (int q : dead) roots.push_back({lambda_from_s(b.h(q), branch), b.U.col(q).cast<cplx>(), -1});

  if (!live.empty()) {
    // Seeds from the level-only problem, refined with eps and R re-frozen.
    const double s0 = [&] {
      double s = 0;
      for (int q : live) s += b.h(q);
      return s / live.size();
    }();
    std::vector<cplx> s = frozen_roots(lambda_from_s(s0, branch), b, live);
    for (int sweep = 0; sweep < 4; ++sweep)
      for (auto& sj : s) {
        auto cand = frozen_roots(lambda_from_s(sj, branch), b, live);
        sj = *std::min_element(cand.begin(), cand.end(), [&](cplx x, cplx y) {
          return std::abs(x - sj) < std::abs(y - sj);
        });
      }
    std::sort(s.begin(), s.end(), [&](cplx x, cplx y) { return x.real() > y.real(); });

    Eigen::Matrix2d Mlev = Eigen::Matrix2d::Zero();
    for (int q : live) Mlev += b.gamma.row(q).transpose() * b.gamma.row(q);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> ms(Mlev);
    const Eigen::Vector2d wbig = ms.eigenvectors().col(1);

    const std::string what = "level " + std::to_string(level) + (branch > 0 ? "+" : "-");
    std::vector<cplx> found;
    for (std::size_t j = 0; j < s.size(); ++j) {
      Fn f = [&](cplx l) {
        cplx v = level_det(l, b, live);
        for (cplx r : found) v /= (l - r);
        return v;
      };
      cplx l = find_root(f, lambda_from_s(s[j], branch), what);
      for (cplx r : found)
        if (std::abs(l - r) <= root_tol * (1 + std::abs(l)))
          throw ConvergenceError("degenerate pair at " + what + ": two labels converged to " +
                                 std::to_string(l.real()) + "+" + std::to_string(l.imag()) + "i");
      found.push_back(l);

      const cplx e = eps_of(l), l2 = l * l;
      Eigen::Matrix2cd K = Eigen::Matrix2cd::Identity() - e * G_excluding(l, b, {});
      Eigen::Vector2cd c = kernel2(K);
      VecC psi = VecC::Zero(b.h.size());
      for (int q = 0; q < b.h.size(); ++q) {
        if (!coupled(b, q)) continue;
        Eigen::Vector2d u = b.gamma.row(q).transpose();
        psi(q) = e * (u(0) * c(0) + u(1) * c(1)) / (b.h(q) - l2);
      }
      roots.push_back({l, b.U.cast<cplx>() * psi, std::abs(wbig(0) * c(0) + wbig(1) * c(1))});
    }
  }

  // Labels: larger overlap with the dominant coupling direction gets +n;
  // ties go to the smaller Im lambda.
  std::stable_sort(roots.begin(), roots.end(), [](const Root& x, const Root& y) {
    if (std::abs(x.overlap - y.overlap) > 1e-12) return x.overlap > y.overlap;
    return x.lambda.imag() < y.lambda.imag();
  });

  std::vector<EigenMode> out;
  for (std::size_t j = 0; j < roots.size(); ++j) {
    ModeLabel lab{ModeKind::Oscillatory, j == 0 ? level : -level, branch, 0};
    out.push_back(assemble(lab, roots[j].lambda, roots[j].pi, nullptr, b));
    if (out.back().residual > root_tol * (level + 1))
      throw ConvergenceError("eigen-residual above tolerance for " + lab.str(),
                             {"residual " + std::to_string(out.back().residual)});
  }
  return out;
}

EigenMode solve_mode(int n, int branch, const Coupling& coupling, const PotentialProfile& v, int N,
                     double root_tol) {
  auto b = real_blocks(coupling, v, N);
  for (auto& m : solve_level(std::abs(n), branch, b, coupling, root_tol))
    if (m.label.n == n) return m;
  throw DomainError("label not produced by level solve");
}

std::array<EigenMode, 2> solve_bath_modes(const RealBlocks& b, double root_tol) {
  const int n = 2 * b.N + 1;
  std::array<EigenMode, 2> out;
  Eigen::Matrix2cd G1 = G_excluding(-1.0, b, {});
  if (G1.norm() <= coupling_floor(b)) {
    for (int j = 0; j < 2; ++j) {
      std::array<cplx, 2> er{};
      er[j] = 1.0;
      out[j] = assemble({ModeKind::Bath, 0, 1, j + 1}, -1.0, VecC::Zero(n), &er, b);
    }
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(G1.real());
  std::vector<cplx> found;
  for (int j = 0; j < 2; ++j) {
    cplx seed = -1.0 - es.eigenvalues()(j);
    Fn f = [&](cplx l) {
      cplx v = ((l + 1.0) * Eigen::Matrix2cd::Identity() - l * G_excluding(l, b, {})).determinant();
      for (cplx r : found) v /= (l - r);
      return v;
    };
    cplx l = find_root(f, seed, "bath mode");
    for (cplx r : found)
      if (std::abs(l - r) <= root_tol)
        throw ConvergenceError("degenerate bath pair at " + std::to_string(l.real()));
    found.push_back(l);
  }
  std::sort(found.begin(), found.end(), [](cplx x, cplx y) {
    return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
  });
  for (int j = 0; j < 2; ++j) {
    const cplx l = found[j], l2 = l * l;
    Eigen::Matrix2cd K = (l + 1.0) * Eigen::Matrix2cd::Identity() - l * G_excluding(l, b, {});
    Eigen::Vector2cd w = kernel2(K);
    int big = std::abs(w(0)) >= std::abs(w(1)) ? 0 : 1;
    w *= std::abs(w(big)) / w(big);
    VecC psi = VecC::Zero(b.h.size());
    for (int q = 0; q < b.h.size(); ++q) {
      if (!coupled(b, q)) continue;
      Eigen::Vector2d u = b.gamma.row(q).transpose();
      psi(q) = l * (u(0) * w(0) + u(1) * w(1)) / (b.h(q) - l2);
    }
    std::array<cplx, 2> er{w(0), w(1)};
    out[j] = assemble({ModeKind::Bath, 0, 1, j + 1}, l, b.U.cast<cplx>() * psi, &er, b);
    if (out[j].residual > root_tol)
      throw ConvergenceError("bath eigen-residual above tolerance",
                             {"residual " + std::to_string(out[j].residual)});
  }
  return out;
}

std::array<EigenMode, 2> solve_bath_modes(const Coupling& coupling, const PotentialProfile& v,
                                          int N, double root_tol) {
  return solve_bath_modes(real_blocks(coupling, v, N), root_tol);
}

Spectrum compute_spectrum(const Coupling& coupling, const PotentialProfile& v, int N,
                          double root_tol, int width) {
  Spectrum sp;
  sp.N = N;
  sp.v = v;
  sp.coupling = coupling.band(N);
  sp.blocks = real_blocks(sp.coupling, v, N);

  // Task 0: bath modes; task 1 + 2*level + (branch<0): one level/branch.
  const int tasks = 1 + 2 * (N + 1);
  std::vector<std::vector<EigenMode>> parts(tasks);
  parallel_for(tasks, width, [&](int t) {
    if (t == 0) {
      auto bm = solve_bath_modes(sp.blocks, root_tol);
      parts[0] = {bm[0], bm[1]};
      return;
    }
    const int level = (t - 1) / 2, branch = ((t - 1) % 2 == 0) ? 1 : -1;
    parts[t] = solve_level(level, branch, sp.blocks, sp.coupling, root_tol);
  });

  sp.modes = parts[0];
  for (int level = 0; level <= N; ++level) {
    auto& plus = parts[1 + 2 * level];
    auto& minus = parts[2 + 2 * level];
    for (std::size_t j = 0; j < plus.size(); ++j) {
      sp.modes.push_back(plus[j]);
      sp.modes.push_back(minus[j]);
    }
  }

  sp.conj_index.assign(sp.modes.size(), -1);
  for (int i = 0; i < sp.dim(); ++i) {
    const auto& m = sp.modes[i];
    if (m.label.kind == ModeKind::Oscillatory) {
      ModeLabel c = m.label;
      c.branch = -c.branch;
      sp.conj_index[i] = sp.index_of(c);
    } else {
      int best = 0;
      for (int j = 1; j < 2; ++j)
        if (std::abs(sp.modes[j].lambda - std::conj(m.lambda)) <
            std::abs(sp.modes[best].lambda - std::conj(m.lambda)))
          best = j;
      sp.conj_index[i] = best;
    }
  }
  return sp;
}

int Spectrum::index_of(const ModeLabel& l) const {
  for (int i = 0; i < dim(); ++i)
    if (modes[i].label == l) return i;
  throw DomainError("no mode with label " + l.str());
}

VecC EigenMode::right() const {
  const auto n = pi.size();
  VecC v(2 * n + 2);
  v << phi, pi, e_r[0], e_r[1];
  return v;
}

VecC EigenMode::left() const {
  const auto n = pi.size();
  VecC v(2 * n + 2);
  v << f_phi, VecC(pi.conjugate()), f_r[0], f_r[1];
  return v;
}

cplx pairing(const EigenMode& m) { return m.left().dot(m.right()); }

cplx cross_pairing(const EigenMode& f, const EigenMode& e) { return f.left().dot(e.right()); }

cplx pairing_from_pi(const EigenMode& m, const RealBlocks& b) {
  const cplx l = m.lambda;
  Eigen::Vector2cd ae = b.beta.transpose().cast<cplx>() * m.pi;
  // <alpha, f_pi>^* <alpha, e_pi> with f_pi = conj(e_pi) and real alpha
  const cplx cross = ae.transpose() * ae;
  const cplx bil = m.pi.transpose() * m.pi;
  return 2.0 * bil + cross / (l * (1.0 + l) * (1.0 + l));
}

double mode_residual(const EigenMode& m, const RealBlocks& b) {
  Eigen::Vector2cd r(m.e_r[0], m.e_r[1]);
  const MatC Hc = b.H.cast<cplx>();
  const MatC Bc = b.beta.cast<cplx>();
  VecC a = m.pi - m.lambda * m.phi;
  VecC p = Hc * m.phi - Bc * r - m.lambda * m.pi;
  Eigen::Vector2cd q = Bc.transpose() * m.pi - r - m.lambda * r;
  return std::sqrt(a.squaredNorm() + p.squaredNorm() + q.squaredNorm());
}

std::array<GridFunction, 2> projection_entry_phi_r(const EigenMode& m, int M) {
  auto ephi = to_grid(m.e_phi, M);
  std::array<GridFunction, 2> out;
  for (int i = 0; i < 2; ++i) {
    // conj(f_r) = -e_r
    const cplx w = -m.e_r[i] / m.pairing;
    out[i].values.resize(M);
    for (int j = 0; j < M; ++j) out[i].values[j] = ephi.values[j] * w;
  }
  return out;
}

PhiPiKernel projection_entry_phi_pi(const EigenMode& m) { return {m.e_phi, m.e_pi, m.pairing}; }

cplx PhiPiKernel::operator()(double x, double z) const {
  return evaluate(e_phi, x) * evaluate(e_pi, z) / pairing;
}

MatC PhiPiKernel::on_grid(int M) const {
  auto a = to_grid(e_phi, M), c = to_grid(e_pi, M);
  MatC K(M, M);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) K(i, j) = a.values[i] * c.values[j] / pairing;
  return K;
}

}  // namespace kgring
