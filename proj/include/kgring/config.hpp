#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "kgring/fourier.hpp"

namespace kgring {

struct Coupling {
  CoeffSeq alpha1, alpha2;  // real-valued, on the coupling's own band
  double c0 = 2.0, c1 = 0.1, c2 = 0.9;

  // (alpha1(n), alpha2(n)), zero beyond the stored band.
  std::array<cplx, 2> at(int n) const;
  // Same coupling on band N (truncated or zero-padded).
  Coupling band(int N) const;
  // max_n alpha*(n).alpha(n) over |n| <= N
  double sup_sq(int N) const;

  // alpha_i(n) = a e^{i theta_i sgn n}; real functions for any a, theta.
  static Coupling uniform(int N, double a, double theta1, double theta2, double c0 = 2.0,
                          double c1 = 0.1, double c2 = 0.9);
};

struct CouplingRow {
  int n;
  double bilinear;   // |alpha.alpha|
  double hermitian;  // alpha*.alpha
  double margin[3];  // >= 0 when the inequality holds
};

struct CouplingViolation {
  int n;
  int inequality;  // 1: c1 <= |a.a|, 2: |a.a| <= c2 a*.a, 3: a*.a <= c0
  std::string message;
};

struct CouplingReport {
  std::vector<CouplingRow> rows;
  std::vector<CouplingViolation> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

// For real alpha the n = 0 coefficients are real, which forces
// |a.a| = a*.a there; inequality 2 is not checked at n = 0 in that case.
CouplingReport validate_coupling(const Coupling& coupling, int N);

struct Temperatures {
  double T1 = 1.0, T2 = 1.0;
};

struct PotentialProfile {
  CoeffSeq vhat;  // real-valued
  double sup_norm = 0.0;
  double ball_radius = 0.0;
  bool in_ball() const { return sup_norm <= ball_radius * (1 + 1e-12); }

  static PotentialProfile make(const CoeffSeq& vhat, const Coupling& coupling, int N,
                               double eps0, int M = 0);
  static PotentialProfile zero(const Coupling& coupling, int N, double eps0 = 0.1);
};

struct RunConfig {
  int N = 16;
  int M = 128;
  double g = 0.01;
  double eps0 = 0.1;
  Coupling coupling;
  Temperatures temps;
  double root_tol = 1e-10;
  double fixpoint_tol = 1e-8;
  double tail_tol = 1e-6;
  std::uint64_t seed = 1;
  int parallel_width = 1;

  void check() const;
};

// Parses JSON text; throws ConfigError naming the offending key path.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
std::string config_to_json(const RunConfig& cfg);

}  // namespace kgring
