#pragma once

#include <utility>

#include "kgring/renorm.hpp"

namespace kgring {

enum class DiagramId { G1_FULL, G1_RESONANT, G2_WHALE, G2_WHALE_TADPOLES, G2_DOUBLE_TADPOLE };
std::string to_string(DiagramId id);

struct DiagramResult {
  DiagramId id{};
  cplx value;
  std::vector<std::pair<int, cplx>> cutoff_trace;  // (level cutoff, partial sum)
  double degree_fit = 0.0;  // slope of log|S_2K - S_K| against log K
  bool divergent = false;   // degree_fit > 0.5 over >= 3 octaves
  double last_octave_variation = 0.0;
};

// Least-squares slope of log|S_{2K} - S_K| against log K over the trace.
double fit_degree(const std::vector<std::pair<int, cplx>>& trace);

// Everything the diagram sums need on one grid: mode functions, the
// covariance weights and the loop factor. By default the loop is
// C(z, z, 0); with_counterterm(v, g) replaces it by C(z, z, 0) - v(z)/(3g),
// which is what remains of the tadpole once v is included in the interaction.
class DiagramInputs {
 public:
  DiagramInputs(const Spectrum& sp, const ModeCovariance& mc, int M = 0);
  void with_counterterm(const PotentialProfile& v, double g);

  const Spectrum& spectrum() const { return *sp_; }
  const ModeCovariance& modes() const { return *mc_; }
  int M() const { return M_; }
  const MatC& E() const { return E_; }
  const MatC& Pi() const { return Pi_; }
  const MatC& K() const { return K_; }
  const VecC& loop() const { return loop_; }
  const VecC& diag() const { return diag_; }
  // e_phi at an arbitrary point, all modes
  VecC E_at(double x) const;

 private:
  const Spectrum* sp_;
  const ModeCovariance* mc_;
  int M_;
  MatC E_, Pi_, K_;
  VecC loop_, diag_;
};

// Default cutoffs: octaves N, N/2, ... down to 2 (ascending).
std::vector<int> octave_cutoffs(int N, int lowest = 2);

DiagramResult g1_full(double x, double y, double g, const DiagramInputs& in,
                      std::vector<int> cutoffs = {});
// Resonant reduction m = n, p = conj(n). With paired = false only the
// upper branch (Im lambda > 0) is kept, so the conjugate partner that
// cancels the 1/n part of each term is missing (diagnostic).
DiagramResult g1_resonant(double x, double y, double g, const DiagramInputs& in,
                          bool paired = true, std::vector<int> cutoffs = {});
DiagramResult g2_whale(double x, double y, double g, const DiagramInputs& in,
                       std::vector<int> cutoffs = {}, int width = 1);

enum class Tadpole { Third, Fourth, Difference };
DiagramResult g2_tadpole_divergence(double x, double y, double g, const DiagramInputs& in,
                                    Tadpole which, std::vector<int> cutoffs = {});

struct TwoPointCorrection {
  cplx bare;     // C_{v*}(x, y, 0)
  cplx first;    // first order with the counterterm
  cplx whale;    // order g^2
  cplx total() const { return bare + first + whale; }
  PotentialProfile v_star;
};
TwoPointCorrection two_point_correction(double x, double y, double g, const RunConfig& cfg);

}  // namespace kgring
