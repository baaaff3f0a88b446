#pragma once

// Brute-force diagram values: time integrals done by Gauss-Legendre panels,
// covariances and propagators taken from the dense operator (matrix
// exponential and Lyapunov solution), no spectral decomposition.

#include "kgring/covariance.hpp"

namespace oracle {

struct QuadratureSetup {
  kgring::Coupling coupling;
  kgring::PotentialProfile v;
  int N = 4;
  kgring::Temperatures temps;
  double panel = 0.25;
  int nodes = 8;
  double decay_margin = 30.0;  // integrate until e^{-margin}
};

// -3g int dt int dz C(z,z,0) [C(z,x,t) D(y,t;z) + (x <-> y)]
kgring::cplx g1_by_quadrature(const QuadratureSetup& s, double g, double x, double y);

// 6g^2 int dt1 dt2 dz1 dz2 D(y,t1+t2;z1) D(x,t2;z2) C(z1,z2,t1)^3 + (x <-> y)
kgring::cplx whale_by_quadrature(const QuadratureSetup& s, double g, double x, double y);

}  // namespace oracle
