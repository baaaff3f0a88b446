#pragma once

#include "kgring/covariance.hpp"

namespace kgring {

struct FixpointIterate {
  PotentialProfile v;
  double residual;  // sup |v - 3g vtilde_v|
  double omega;     // damping used to produce the next iterate
};

struct FixpointTrace {
  std::vector<FixpointIterate> iterates;
  std::vector<double> contraction_ratios;
  bool converged = false;
  // geometric mean of the recorded ratios
  double observed_ratio() const;
};

// C_v(x, x, 0) as a real band-limited profile (band 2N).
PotentialProfile tilde_v(const PotentialProfile& v, const RunConfig& cfg);

struct FixpointResult {
  PotentialProfile v;
  FixpointTrace trace;
};

// v <- (1 - w) v + w 3g vtilde_v from v = 0, w halved on residual increase.
FixpointResult solve_fixed_point(double g, const RunConfig& cfg, int max_iter = 50);

struct LipschitzProbe {
  double ratio = 0.0;
  bool degenerate = false;  // v1 == v2
};
LipschitzProbe lipschitz_probe(const PotentialProfile& v1, const PotentialProfile& v2,
                               const RunConfig& cfg);

// sup norm of a real band-limited profile on an M-point grid.
double sup_norm(const CoeffSeq& h, int M);

}  // namespace kgring
