#pragma once

#include <cstdint>

#include "kgring/covariance.hpp"
#include "kgring/summation.hpp"

namespace kgring {

// State in the real basis: (phi, pi, r), length 2(2N+1) + 2.
struct StateVector {
  int N = 0;
  VecR x;
  double time = 0.0;

  static StateVector zero(int N);
  int n() const { return 2 * N + 1; }
  auto phi() const { return x.segment(0, n()); }
  auto pi() const { return x.segment(n(), n()); }
  auto r() const { return x.segment(2 * n(), 2); }
  CoeffSeq phihat() const;
  CoeffSeq pihat() const;
};

// Counter-based normal deviates keyed by (seed, trajectory, step, component).
// Stateless, so any sample can be regenerated in isolation.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t trajectory) : seed_(seed), traj_(trajectory) {}
  double normal(std::uint64_t step, std::uint64_t comp) const;
  void fill(std::uint64_t step, std::uint64_t stream, VecR& out) const;

 private:
  std::uint64_t seed_, traj_;
};

// Exact OU transition over dt: x -> F x + L xi, L L^T = int_0^dt e^{sA} Q e^{sA^T} ds.
class LinearFlow {
 public:
  LinearFlow(const MatR& A, const MatR& Q, double dt);
  LinearFlow(const Coupling& coupling, const PotentialProfile& v, int N, const Temperatures& temps,
             double dt);
  double dt() const { return dt_; }
  int dim() const { return static_cast<int>(F_.rows()); }
  const MatR& F() const { return F_; }
  const MatR& Qdt() const { return Qdt_; }
  const MatR& noise_factor() const { return L_; }

 private:
  double dt_;
  MatR F_, Qdt_, L_;
};

StateVector step_linear(const StateVector& s, const LinearFlow& flow, const VecR& xi);

// Strang splitting: half linear flow, cubic kick on the grid, half linear flow.
// The linear part carries v_shift, the kick applies -(g phi^3 - v_shift phi),
// so the net force is (d^2 - 1) phi - g phi^3.
class NonlinearStepper {
 public:
  NonlinearStepper(const Coupling& coupling, const PotentialProfile& v_shift, int N,
                   const Temperatures& temps, double dt, double g, int M = 0);
  double dt() const { return dt_; }
  int M() const { return M_; }
  // false (state untouched past the kick) when sup |phi| exceeds the blow-up bound
  bool step(StateVector& s, const VecR& xi1, const VecR& xi2) const;
  static constexpr double kBlowUp = 1e6;

 private:
  void kick(VecR& x, double h) const;
  int N_, M_;
  double dt_, g_;
  LinearFlow half_;
  MatR G_;   // M x (2N+1) basis values on the grid
  VecR vgrid_;
};

// Stability bound for the explicit kick.
inline double max_nonlinear_dt(int N) { return 0.5 / (N + 1); }

// Energy 1/2(|pi|^2 + |d phi|^2 + |phi|^2 + |r|^2) + g/4 int phi^4.
double energy(const StateVector& s, double g = 0.0, int M = 0);
// (1/2pi) int pi d_x phi dx
double current_density(const StateVector& s);

// Batch-means accumulator for K scalar observables. Batches from different
// trajectories are merged by index.
class BatchStats {
 public:
  BatchStats() = default;
  BatchStats(int observables, int batches);
  void add(int batch, const VecR& values);
  void merge(const BatchStats& other);
  int observables() const { return K_; }
  int batches() const { return B_; }
  long long count() const;
  double mean(int k) const;
  double se(int k) const;
  double variance(int k) const;  // per-sample variance
  double ess(int k) const;
  VecR batch_means(int k) const;
  // largest |first-half mean - second-half mean| / combined SE over observables
  double drift_sigma() const;

 private:
  int K_ = 0, B_ = 0;
  std::vector<std::vector<Neumaier>> sum_, sumsq_;
  std::vector<long long> n_;
};

enum class SimMode { Linear, Nonlinear };

struct SimConfig {
  SimMode mode = SimMode::Linear;
  double dt = 0.0;            // linear: sample interval (0 -> 1/|max Re lambda|); nonlinear: step
  int sample_every = 1;       // nonlinear only
  long long samples = 10000;  // per trajectory
  double burn_in = -1.0;      // time units; < 0 -> 20/|max Re lambda|
  int trajectories = 1;
  int batches = 50;
  std::vector<double> probes;  // empty -> 3 equispaced points
  bool decay = false;          // estimate per-mode decay rates
  int width = 1;
};

struct DecayEstimate {
  ModeLabel label;
  cplx lambda;
  double tau = 0.0;
  double rate = 0.0;  // estimate of Re lambda
  double se = 0.0;
};

struct SimOutput {
  int N = 0;
  std::uint64_t seed = 0;
  std::vector<double> probes;
  std::vector<std::pair<int, int>> pairs;  // all ordered probe pairs
  BatchStats cov;     // phi(x_i) phi(x_j) over pairs
  BatchStats cross;   // phi(x_i) pi(x_j) over pairs
  BatchStats current;
  // per decay mode: Re/Im of Phi_{s+tau}(f) conj(Phi_s(f)) and |Phi_s(f)|^2
  std::vector<DecayEstimate> decay_modes;
  BatchStats decay;
  long long aborted = 0;
  bool flagged = false;  // batch means drift beyond 5 sigma

  void merge(const SimOutput& other);
  double min_ess() const;
  void finalize_decay();
};

SimOutput run_stationary(const RunConfig& cfg, const SimConfig& sim);

}  // namespace kgring
