#include "kgring/fourier.hpp"

#include <cmath>

namespace kgring {

namespace {
const double kInvSqrt2Pi = 1.0 / std::sqrt(kTwoPi);
const double kInvSqrtPi = 1.0 / std::sqrt(kPi);
const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

void check_grid(int N, int M) {
  if (M < 2 * N + 1)
    throw DomainError("grid of " + std::to_string(M) + " points cannot carry N=" +
                      std::to_string(N) + " (need M >= " + std::to_string(2 * N + 1) +
                      ")");
}

// e^{2 pi i m / M}, m = 0..M-1; exact index arithmetic keeps twiddles accurate.
std::vector<cplx> twiddles(int M) {
  std::vector<cplx> w(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m) w[m] = std::polar(1.0, kTwoPi * m / M);
  return w;
}

int wrap(long long a, int M) {
  long long r = a % M;
  return static_cast<int>(r < 0 ? r + M : r);
}
}  // namespace

CoeffSeq::CoeffSeq(int N, bool real_valued)
    : N_(N), c_(static_cast<std::size_t>(2 * N + 1)), real_(real_valued) {
  if (N < 0) throw DomainError("negative truncation level");
}

CoeffSeq::CoeffSeq(int N, std::vector<cplx> c, bool real_valued)
    : N_(N), c_(std::move(c)), real_(real_valued) {
  if (N < 0 || c_.size() != static_cast<std::size_t>(2 * N + 1))
    throw DomainError("coefficient sequence length must be 2N+1");
}

CoeffSeq CoeffSeq::resized(int N) const {
  CoeffSeq out(N, real_);
  int K = std::min(N, N_);
  for (int k = -K; k <= K; ++k) out(k) = (*this)(k);
  return out;
}

double CoeffSeq::norm() const {
  double s = 0;
  for (auto z : c_) s += std::norm(z);
  return std::sqrt(s);
}

double CoeffSeq::reality_defect() const {
  double d = 0;
  for (int k = 0; k <= N_; ++k)
    d = std::max(d, std::abs((*this)(-k) - std::conj((*this)(k))));
  return d;
}

GridFunction to_grid(const CoeffSeq& h, int M) {
  const int N = h.N();
  check_grid(N, M);
  auto w = twiddles(M);
  GridFunction u;
  u.values.assign(static_cast<std::size_t>(M), cplx(0));
  for (int j = 0; j < M; ++j) {
    cplx s = 0;
    for (int k = -N; k <= N; ++k) s += h(k) * w[wrap(static_cast<long long>(k) * j, M)];
    u.values[j] = s * kInvSqrt2Pi;
  }
  if (h.real_valued())
    for (auto& z : u.values) z = z.real();
  return u;
}

CoeffSeq from_grid(const GridFunction& u, int N) {
  const int M = u.M();
  check_grid(N, M);
  auto w = twiddles(M);
  CoeffSeq h(N);
  const double scale = kTwoPi / M * kInvSqrt2Pi;
  for (int k = -N; k <= N; ++k) {
    cplx s = 0;
    for (int j = 0; j < M; ++j) s += u.values[j] * std::conj(w[wrap(static_cast<long long>(k) * j, M)]);
    h(k) = s * scale;
  }
  return h;
}

cplx integrate(const GridFunction& u) {
  cplx s = 0;
  for (auto z : u.values) s += z;
  return s * (kTwoPi / u.M());
}

cplx integrate(const VecC& values) { return values.sum() * (kTwoPi / values.size()); }

cplx evaluate(const CoeffSeq& h, double x) {
  cplx s = 0;
  for (int k = -h.N(); k <= h.N(); ++k) s += h(k) * std::polar(1.0, k * x);
  return s * kInvSqrt2Pi;
}

namespace realbasis {

VecC from_fourier(const CoeffSeq& h) {
  const int N = h.N();
  VecC a(dim(N));
  a(0) = h(0);
  for (int k = 1; k <= N; ++k) {
    a(2 * k - 1) = (h(k) + h(-k)) * kInvSqrt2;
    a(2 * k) = cplx(0, 1) * (h(k) - h(-k)) * kInvSqrt2;
  }
  return a;
}

CoeffSeq to_fourier(const VecC& a, int N, bool real_valued) {
  CoeffSeq h(N, real_valued);
  h(0) = a(0);
  const cplx I(0, 1);
  for (int k = 1; k <= N; ++k) {
    h(k) = (a(2 * k - 1) - I * a(2 * k)) * kInvSqrt2;
    h(-k) = (a(2 * k - 1) + I * a(2 * k)) * kInvSqrt2;
  }
  return h;
}

MatR grid_matrix(int N, int M) {
  check_grid(N, M);
  MatR B(M, dim(N));
  for (int j = 0; j < M; ++j) B.row(j) = at(N, GridFunction::x(j, M)).transpose();
  return B;
}

VecR at(int N, double x) {
  VecR b(dim(N));
  b(0) = kInvSqrt2Pi;
  for (int k = 1; k <= N; ++k) {
    b(2 * k - 1) = std::cos(k * x) * kInvSqrtPi;
    b(2 * k) = std::sin(k * x) * kInvSqrtPi;
  }
  return b;
}

}  // namespace realbasis
}  // namespace kgring
