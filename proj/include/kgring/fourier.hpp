#pragma once

#include "kgring/common.hpp"

namespace kgring {

// Coefficients of h(x) = sum_k c(k) e^{ikx}/sqrt(2pi), |k| <= N.
class CoeffSeq {
 public:
  CoeffSeq() = default;
  explicit CoeffSeq(int N, bool real_valued = false);
  CoeffSeq(int N, std::vector<cplx> c, bool real_valued = false);

  int N() const { return N_; }
  std::size_t size() const { return c_.size(); }
  bool real_valued() const { return real_; }
  void set_real_valued(bool r) { real_ = r; }

  cplx& operator()(int k) { return c_[static_cast<std::size_t>(k + N_)]; }
  cplx operator()(int k) const { return c_[static_cast<std::size_t>(k + N_)]; }
  const std::vector<cplx>& data() const { return c_; }

  // Zero-pads or truncates.
  CoeffSeq resized(int N) const;
  double norm() const;
  // max |c(-k) - conj(c(k))|
  double reality_defect() const;

 private:
  int N_ = 0;
  std::vector<cplx> c_ = std::vector<cplx>(1);
  bool real_ = false;
};

struct GridFunction {
  std::vector<cplx> values;
  int M() const { return static_cast<int>(values.size()); }
  static double x(int j, int M) { return kTwoPi * j / M; }
};

GridFunction to_grid(const CoeffSeq& h, int M);
CoeffSeq from_grid(const GridFunction& u, int N);
cplx integrate(const GridFunction& u);
cplx integrate(const VecC& values);

// Evaluate h at arbitrary points.
cplx evaluate(const CoeffSeq& h, double x);

// Real orthonormal basis on [0, 2pi]:
//   j = 0      : 1/sqrt(2pi)
//   j = 2k - 1 : cos(kx)/sqrt(pi)
//   j = 2k     : sin(kx)/sqrt(pi)
// Real functions have real coordinates here, and multiplication by a real
// potential is a real symmetric matrix.
namespace realbasis {
inline int dim(int N) { return 2 * N + 1; }
inline int level(int j) { return (j + 1) / 2; }
VecC from_fourier(const CoeffSeq& h);
CoeffSeq to_fourier(const VecC& a, int N, bool real_valued = false);
// M x (2N+1) matrix of basis functions on the uniform grid.
MatR grid_matrix(int N, int M);
// Basis functions at a single point.
VecR at(int N, double x);
}  // namespace realbasis

}  // namespace kgring
