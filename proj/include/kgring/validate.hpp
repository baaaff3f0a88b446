#pragma once

#include <string>

#include "kgring/spectrum.hpp"

namespace kgring {

// One tested inequality instance: value <= c * shape, with c fitted.
struct LemmaRow {
  int which = 0;       // inequality index within the report
  int n = 0;
  double param = 0.0;  // eta for the modulus-type sums, otherwise unused
  double value = 0.0;
  double shape = 1.0;
  double bound = 0.0;  // fitted constant times shape
  bool lower = false;  // value >= bound instead of value <= bound
  double margin() const;
};

// Constants are fitted on a lower range (small n, or coarse eta) with a 20%
// allowance and then must bound every tested row; pass means no row exceeds
// its fitted bound. Lower-bound inequalities (c0, pairing c) are fitted
// from the minimum instead.
struct LemmaReport {
  std::string id;
  int n_min = 0, n_max = 0;
  std::vector<std::pair<std::string, double>> constants;
  std::vector<LemmaRow> rows;
  std::vector<std::string> notes;
  double worst_margin = 0.0;
  bool pass = false;
  bool skipped = false;

  double constant(const std::string& name) const;
};

inline constexpr double kFitAllowance = 0.2;
inline constexpr double kMarginRoundoff = 1e-12;

// Estimate sums over m >= 0, m != n:
//   (i)  sum 1/|m^2 - n^2|             <= c / (1 + n^gamma)
//   (ii) sum min(m eta, 1)/|m^2 - n^2| <= c eta^gamma
// Partial sums to m_max plus an integral tail bound.
LemmaReport check_estimate_sums(int n_max, double gamma, long m_max = 1000000);
// Exact value of sum (i) for n >= 0 (harmonic numbers).
double estimate_i_exact(int n);
double estimate_i_partial(int n, long m_max);
double estimate_ii_partial(int n, double eta, long m_max);

// |lambda_n^2 - lambda_{-n}^2| >= c0 |eps| |alpha(n)|^2 for n >= 1.
LemmaReport check_eigen_splitting(const Spectrum& sp);

// psi_n = e_{n,pi} normalized: sup|<alpha, psi>|, sup_x|psi|, modulus of
// continuity against |n| d + d^gamma, and min over phase of
// ||psi - e^{i theta} conj(psi)|| against |Im eps|(1/|Re eps| + 1/(|n|+1)).
LemmaReport check_eigenfunction_bounds(const Spectrum& sp, double gamma, int M = 0);

// c ||L^{-1} f|| ||L e|| <= |<f, e>| <= ||L^{-1} f|| ||L e||, L = diag((k^2+1)^{1/2}, 1, 1);
// also the pi-only form of <f, e>.
LemmaReport check_pairing_bounds(const Spectrum& sp);
// <f, e> from pi components: 2<f_pi, e_pi> + conj<alpha, f_pi> <alpha, e_pi>/(lambda (1+lambda)^2)
cplx pairing_from_pi_components(const EigenMode& m, const RealBlocks& blocks);

// Lipschitz dependence of projections and eigenvalues on v.
LemmaReport check_v_lipschitz(const Coupling& coupling, const PotentialProfile& v1,
                              const PotentialProfile& v2, int N, int M = 0);

// First-order eigenvalue shift along v1 + tau (v2 - v1) at tau = 0.
cplx eigenvalue_derivative(const EigenMode& m, const RealBlocks& blocks, const MatR& dv);
// Multiplication by (v2 - v1) in the real basis.
MatR potential_difference_matrix(const Coupling& coupling, const PotentialProfile& v1,
                                 const PotentialProfile& v2, int N);

// Largest relative change of shared constants between two reports
// (restricted to `names` when given).
double constant_drift(const LemmaReport& a, const LemmaReport& b, const std::vector<std::string>& names = {});
// The fitted constants of a report, as opposed to diagnostics that are
// expected to move with N (defects, top-level ratios).
std::vector<std::string> fitted_constant_names(const std::string& id);

std::string report_to_json(const LemmaReport& r);

}  // namespace kgring
