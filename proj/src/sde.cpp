#include "kgring/sde.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include "kgring/parallel.hpp"

namespace kgring {

namespace {

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double unit_open(std::uint64_t h) { return (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53; }

MatR psd_sqrt_factor(const MatR& S) {
  Eigen::SelfAdjointEigenSolver<MatR> es(0.5 * (S + S.transpose()));
  VecR w = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * w.asDiagonal();
}

double max_re(const Spectrum& sp) {
  double m = -std::numeric_limits<double>::infinity();
  for (auto& mode : sp.modes) m = std::max(m, mode.lambda.real());
  return m;
}

}  // namespace

StateVector StateVector::zero(int N) {
  StateVector s;
  s.N = N;
  s.x = VecR::Zero(2 * (2 * N + 1) + 2);
  return s;
}

CoeffSeq StateVector::phihat() const {
  return realbasis::to_fourier(VecC(phi().cast<cplx>()), N, true);
}
CoeffSeq StateVector::pihat() const {
  return realbasis::to_fourier(VecC(pi().cast<cplx>()), N, true);
}

double CounterRng::normal(std::uint64_t step, std::uint64_t comp) const {
  std::uint64_t h = splitmix(seed_);
  h = splitmix(h ^ traj_);
  h = splitmix(h ^ step);
  h = splitmix(h ^ comp);
  const double u1 = unit_open(h), u2 = unit_open(splitmix(h ^ 0x5851f42d4c957f2dULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

void CounterRng::fill(std::uint64_t step, std::uint64_t stream, VecR& out) const {
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out(i) = normal(step, (stream << 32) | static_cast<std::uint64_t>(i));
}

// Van Loan on a short interval h: exp([[-A, Q], [0, A^T]] h) = [[., G12], [0, G22]],
// F_h = G22^T, int_0^h e^{sA} Q e^{sA^T} ds = F_h G12. The e^{-Ah} block
// overflows for long intervals, so dt is reached by doubling:
// F_2h = F_h^2, Q_2h = Q_h + F_h Q_h F_h^T.
LinearFlow::LinearFlow(const MatR& A, const MatR& Q, double dt) : dt_(dt) {
  if (!(dt > 0)) throw DomainError("LinearFlow: dt must be positive");
  const Eigen::Index d = A.rows();
  int doublings = 0;
  double h = dt;
  while (h > 0.5) {
    h *= 0.5;
    ++doublings;
  }
  MatR C = MatR::Zero(2 * d, 2 * d);
  C.topLeftCorner(d, d) = -A * h;
  C.topRightCorner(d, d) = Q * h;
  C.bottomRightCorner(d, d) = A.transpose() * h;
  MatR E = C.exp();
  F_ = E.bottomRightCorner(d, d).transpose();
  Qdt_ = F_ * E.topRightCorner(d, d);
  for (int i = 0; i < doublings; ++i) {
    Qdt_ = (Qdt_ + F_ * Qdt_ * F_.transpose()).eval();
    F_ = (F_ * F_).eval();
  }
  Qdt_ = 0.5 * (Qdt_ + Qdt_.transpose()).eval();
  L_ = psd_sqrt_factor(Qdt_);
}

LinearFlow::LinearFlow(const Coupling& coupling, const PotentialProfile& v, int N,
                       const Temperatures& temps, double dt)
    : LinearFlow(build_real_operator(coupling, v, N), diffusion_matrix(N, temps), dt) {}

StateVector step_linear(const StateVector& s, const LinearFlow& flow, const VecR& xi) {
  StateVector out = s;
  out.x = flow.F() * s.x + flow.noise_factor() * xi;
  out.time += flow.dt();
  return out;
}

NonlinearStepper::NonlinearStepper(const Coupling& coupling, const PotentialProfile& v_shift,
                                   int N, const Temperatures& temps, double dt, double g, int M)
    : N_(N),
      M_(M > 0 ? M : 4 * N + 2),
      dt_(dt),
      g_(g),
      half_(coupling, v_shift, N, temps, 0.5 * dt) {
  if (M_ < 4 * N + 1) throw DomainError("NonlinearStepper: grid needs M >= 4N+1");
  if (dt > max_nonlinear_dt(N) * (1 + 1e-12))
    throw DomainError("NonlinearStepper: dt above stability bound 0.5/(N+1)");
  G_ = realbasis::grid_matrix(N, M_);
  const GridFunction vg = to_grid(v_shift.vhat, M_);
  vgrid_.resize(M_);
  for (int j = 0; j < M_; ++j) vgrid_(j) = vg.values[static_cast<std::size_t>(j)].real();
}

void NonlinearStepper::kick(VecR& x, double h) const {
  const int n = 2 * N_ + 1;
  const VecR ph = G_ * x.head(n);
  const VecR force = g_ * ph.array().cube() - vgrid_.array() * ph.array();
  x.segment(n, n) -= h * (kTwoPi / M_) * (G_.transpose() * force);
}

bool NonlinearStepper::step(StateVector& s, const VecR& xi1, const VecR& xi2) const {
  s.x = half_.F() * s.x + half_.noise_factor() * xi1;
  kick(s.x, dt_);
  s.x = half_.F() * s.x + half_.noise_factor() * xi2;
  s.time += dt_;
  const double sup = (G_ * s.x.head(2 * N_ + 1)).cwiseAbs().maxCoeff();
  return std::isfinite(sup) && sup <= kBlowUp;
}

double energy(const StateVector& s, double g, int M) {
  const int n = s.n();
  double e = 0.5 * (s.pi().squaredNorm() + s.r().squaredNorm());
  for (int j = 0; j < n; ++j) {
    const double k = realbasis::level(j);
    e += 0.5 * (k * k + 1) * s.x(j) * s.x(j);
  }
  if (g != 0.0) {
    if (M <= 0) M = 4 * s.N + 2;
    const VecR ph = realbasis::grid_matrix(s.N, M) * s.phi();
    e += 0.25 * g * (kTwoPi / M) * ph.array().pow(4).sum();
  }
  return e;
}

double current_density(const StateVector& s) {
  const int n = s.n();
  double acc = 0.0;
  for (int k = 1; 2 * k < n; ++k)
    acc += k * (s.x(n + 2 * k - 1) * s.x(2 * k) - s.x(n + 2 * k) * s.x(2 * k - 1));
  return acc / kTwoPi;
}

// ---- batch means ----

BatchStats::BatchStats(int observables, int batches)
    : K_(observables),
      B_(batches),
      sum_(static_cast<std::size_t>(batches), std::vector<Neumaier>(static_cast<std::size_t>(observables))),
      sumsq_(sum_),
      n_(static_cast<std::size_t>(batches), 0) {}

void BatchStats::add(int b, const VecR& values) {
  auto& s = sum_[static_cast<std::size_t>(b)];
  auto& q = sumsq_[static_cast<std::size_t>(b)];
  for (int k = 0; k < K_; ++k) {
    s[static_cast<std::size_t>(k)].add(values(k));
    q[static_cast<std::size_t>(k)].add(values(k) * values(k));
  }
  ++n_[static_cast<std::size_t>(b)];
}

void BatchStats::merge(const BatchStats& o) {
  if (o.K_ == 0) return;
  if (K_ == 0) {
    *this = o;
    return;
  }
  if (o.K_ != K_ || o.B_ != B_) throw DomainError("BatchStats::merge: shape mismatch");
  for (std::size_t b = 0; b < n_.size(); ++b) {
    for (std::size_t k = 0; k < static_cast<std::size_t>(K_); ++k) {
      sum_[b][k].add(o.sum_[b][k].value());
      sumsq_[b][k].add(o.sumsq_[b][k].value());
    }
    n_[b] += o.n_[b];
  }
}

long long BatchStats::count() const {
  long long c = 0;
  for (auto v : n_) c += v;
  return c;
}

double BatchStats::mean(int k) const {
  Neumaier s;
  for (std::size_t b = 0; b < n_.size(); ++b) s.add(sum_[b][static_cast<std::size_t>(k)].value());
  return s.value() / static_cast<double>(count());
}

VecR BatchStats::batch_means(int k) const {
  std::vector<double> m;
  for (std::size_t b = 0; b < n_.size(); ++b)
    if (n_[b] > 0) m.push_back(sum_[b][static_cast<std::size_t>(k)].value() / n_[b]);
  return Eigen::Map<VecR>(m.data(), static_cast<Eigen::Index>(m.size()));
}

namespace {
double se_of(const VecR& bm) {
  const auto B = bm.size();
  if (B < 2) return std::numeric_limits<double>::infinity();
  const double mu = bm.mean();
  return std::sqrt((bm.array() - mu).square().sum() / (B - 1) / B);
}
}  // namespace

double BatchStats::se(int k) const { return se_of(batch_means(k)); }

double BatchStats::variance(int k) const {
  Neumaier q;
  for (std::size_t b = 0; b < n_.size(); ++b) q.add(sumsq_[b][static_cast<std::size_t>(k)].value());
  const double mu = mean(k);
  return q.value() / static_cast<double>(count()) - mu * mu;
}

double BatchStats::ess(int k) const {
  const double s = se(k);
  return s > 0 ? variance(k) / (s * s) : static_cast<double>(count());
}

double BatchStats::drift_sigma() const {
  double worst = 0.0;
  for (int k = 0; k < K_; ++k) {
    VecR bm = batch_means(k);
    const auto h = bm.size() / 2;
    if (h < 2) continue;
    VecR a = bm.head(h), b = bm.tail(h);
    const double comb = std::hypot(se_of(a), se_of(b));
    if (comb > 0) worst = std::max(worst, std::abs(a.mean() - b.mean()) / comb);
  }
  return worst;
}

// ---- stationary runs ----

void SimOutput::merge(const SimOutput& o) {
  cov.merge(o.cov);
  cross.merge(o.cross);
  current.merge(o.current);
  decay.merge(o.decay);
  aborted += o.aborted;
  flagged = flagged || o.flagged;
}

double SimOutput::min_ess() const {
  double m = std::numeric_limits<double>::infinity();
  for (int k = 0; k < cov.observables(); ++k) m = std::min(m, cov.ess(k));
  for (int k = 0; k < current.observables(); ++k) m = std::min(m, current.ess(k));
  return m;
}

void SimOutput::finalize_decay() {
  if (decay_modes.empty() || decay.count() == 0) return;
  // jackknife over batches of log|<z_tau>| - log<|z_0|^2>
  for (std::size_t i = 0; i < decay_modes.size(); ++i) {
    auto& d = decay_modes[i];
    const int k = 3 * static_cast<int>(i);
    VecR re = decay.batch_means(k), im = decay.batch_means(k + 1), z0 = decay.batch_means(k + 2);
    const auto Bn = re.size();
    auto est = [&](double sr, double si, double s0) {
      return std::log(std::hypot(sr, si) / s0) / d.tau;
    };
    d.rate = est(re.mean(), im.mean(), z0.mean());
    VecR jk(Bn);
    for (Eigen::Index b = 0; b < Bn; ++b) {
      const double w = 1.0 / (Bn - 1);
      jk(b) = est((re.sum() - re(b)) * w, (im.sum() - im(b)) * w, (z0.sum() - z0(b)) * w);
    }
    const double mu = jk.mean();
    d.se = std::sqrt((Bn - 1.0) / Bn * (jk.array() - mu).square().sum());
  }
}

namespace {

struct RunPlan {
  int N, n, d, P;
  MatR probe_basis;  // P x n
  double dt, burn;
  std::vector<std::pair<int, int>> pairs;
  std::vector<const EigenMode*> decay_modes;
  std::vector<int> decay_lag;        // lag index per decay mode
  std::vector<LinearFlow> lag_flows;
};

SimOutput empty_output(const RunPlan& p, const RunConfig& cfg, const SimConfig& sim,
                       const std::vector<double>& probes) {
  SimOutput o;
  o.N = cfg.N;
  o.seed = cfg.seed;
  o.probes = probes;
  o.pairs = p.pairs;
  o.cov = BatchStats(static_cast<int>(p.pairs.size()), sim.batches);
  o.cross = BatchStats(static_cast<int>(p.pairs.size()), sim.batches);
  o.current = BatchStats(1, sim.batches);
  for (std::size_t i = 0; i < p.decay_modes.size(); ++i) {
    DecayEstimate e;
    e.label = p.decay_modes[i]->label;
    e.lambda = p.decay_modes[i]->lambda;
    e.tau = p.lag_flows[static_cast<std::size_t>(p.decay_lag[i])].dt();
    o.decay_modes.push_back(e);
  }
  if (!p.decay_modes.empty()) o.decay = BatchStats(3 * static_cast<int>(p.decay_modes.size()), sim.batches);
  return o;
}

void record(SimOutput& o, const RunPlan& p, const StateVector& s, int batch) {
  const VecR ph = p.probe_basis * s.phi(), pp = p.probe_basis * s.pi();
  VecR c(p.pairs.size()), x(p.pairs.size());
  for (std::size_t q = 0; q < p.pairs.size(); ++q) {
    c(static_cast<Eigen::Index>(q)) = ph(p.pairs[q].first) * ph(p.pairs[q].second);
    x(static_cast<Eigen::Index>(q)) = ph(p.pairs[q].first) * pp(p.pairs[q].second);
  }
  o.cov.add(batch, c);
  o.cross.add(batch, x);
  VecR j(1);
  j(0) = current_density(s);
  o.current.add(batch, j);
}

}  // namespace

SimOutput run_stationary(const RunConfig& cfg, const SimConfig& sim) {
  cfg.check();
  if (sim.samples < sim.batches || sim.batches < 4)
    throw ConfigError("simulate.samples", "samples must be >= batches >= 4");
  const PotentialProfile v = PotentialProfile::zero(cfg.coupling, cfg.N, cfg.eps0);
  const Spectrum sp = compute_spectrum(cfg.coupling, v, cfg.N, cfg.root_tol);
  const double slow = max_re(sp);
  if (!(slow < 0)) throw DomainError("run_stationary: drift is not dissipative (max Re lambda >= 0)");

  RunPlan p;
  p.N = cfg.N;
  p.n = 2 * cfg.N + 1;
  p.d = 2 * p.n + 2;
  std::vector<double> probes = sim.probes;
  if (probes.empty())
    for (int i = 0; i < 3; ++i) probes.push_back(kTwoPi * i / 3);
  p.P = static_cast<int>(probes.size());
  p.probe_basis.resize(p.P, p.n);
  for (int i = 0; i < p.P; ++i) p.probe_basis.row(i) = realbasis::at(cfg.N, probes[static_cast<std::size_t>(i)]).transpose();
  for (int i = 0; i < p.P; ++i)
    for (int j = 0; j < p.P; ++j) p.pairs.push_back({i, j});
  p.burn = sim.burn_in >= 0 ? sim.burn_in : 20.0 / std::abs(slow);

  const MatR A = build_real_operator(cfg.coupling, v, cfg.N);
  const MatR Q = diffusion_matrix(cfg.N, cfg.temps);

  if (sim.mode == SimMode::Linear) {
    p.dt = sim.dt > 0 ? sim.dt : 1.0 / std::abs(slow);
    if (sim.decay) {
      // one representative per conjugate pair; lags on a doubling ladder
      double fastest = 0.0;
      for (auto& m : sp.modes)
        if (m.label.kind == ModeKind::Bath || m.label.branch > 0) {
          p.decay_modes.push_back(&m);
          fastest = std::max(fastest, std::abs(m.lambda.real()));
        }
      const double tau0 = 1.0 / fastest;
      int nlag = 0;
      for (auto* m : p.decay_modes) {
        const double target = 1.0 / std::abs(m->lambda.real());
        const int k = std::max(0, static_cast<int>(std::lround(std::log2(target / tau0))));
        p.decay_lag.push_back(k);
        nlag = std::max(nlag, k + 1);
      }
      for (int k = 0; k < nlag; ++k) p.lag_flows.emplace_back(A, Q, tau0 * std::ldexp(1.0, k));
    }
  } else {
    if (sim.decay) throw ConfigError("simulate.decay", "decay estimates need the linear mode");
    p.dt = sim.dt > 0 ? sim.dt : max_nonlinear_dt(cfg.N);
  }

  std::vector<SimOutput> outs(static_cast<std::size_t>(sim.trajectories));
  const long long burn_steps = static_cast<long long>(std::ceil(p.burn / p.dt));

  if (sim.mode == SimMode::Linear) {
    const LinearFlow flow(A, Q, p.dt);
    std::vector<VecC> fl;
    for (auto* m : p.decay_modes) fl.push_back(m->left());
    parallel_for(sim.trajectories, sim.width, [&](int t) {
      SimOutput o = empty_output(p, cfg, sim, probes);
      const CounterRng rng(cfg.seed, static_cast<std::uint64_t>(t));
      StateVector s = StateVector::zero(cfg.N);
      VecR xi(p.d);
      std::uint64_t step = 0;
      for (long long i = 0; i < burn_steps; ++i, ++step) {
        rng.fill(step, 0, xi);
        s = step_linear(s, flow, xi);
      }
      VecR dz(o.decay.observables());
      for (long long i = 0; i < sim.samples; ++i, ++step) {
        rng.fill(step, 0, xi);
        s = step_linear(s, flow, xi);
        const int batch = static_cast<int>(i * sim.batches / sim.samples);
        record(o, p, s, batch);
        if (!p.decay_modes.empty()) {
          std::vector<VecR> branch;
          for (std::size_t k = 0; k < p.lag_flows.size(); ++k) {
            rng.fill(step, 1 + k, xi);
            branch.push_back(p.lag_flows[k].F() * s.x + p.lag_flows[k].noise_factor() * xi);
          }
          for (std::size_t m = 0; m < p.decay_modes.size(); ++m) {
            const cplx z0 = fl[m].dot(s.x.cast<cplx>());
            const cplx zt = fl[m].dot(branch[static_cast<std::size_t>(p.decay_lag[m])].cast<cplx>());
            const cplx prod = zt * std::conj(z0);
            dz(3 * m) = prod.real();
            dz(3 * m + 1) = prod.imag();
            dz(3 * m + 2) = std::norm(z0);
          }
          o.decay.add(batch, dz);
        }
      }
      outs[static_cast<std::size_t>(t)] = std::move(o);
    });
  } else {
    const NonlinearStepper stepper(cfg.coupling, v, cfg.N, cfg.temps, p.dt, cfg.g,
                                   std::max(cfg.M, 4 * cfg.N + 2));
    parallel_for(sim.trajectories, sim.width, [&](int t) {
      SimOutput o = empty_output(p, cfg, sim, probes);
      const CounterRng rng(cfg.seed, static_cast<std::uint64_t>(t));
      StateVector s = StateVector::zero(cfg.N);
      VecR xi1(p.d), xi2(p.d);
      std::uint64_t step = 0;
      const long long total = burn_steps + sim.samples * sim.sample_every;
      for (long long i = 0; i < total; ++i, ++step) {
        rng.fill(step, 0, xi1);
        rng.fill(step, 1, xi2);
        if (!stepper.step(s, xi1, xi2)) {
          SimOutput bad = empty_output(p, cfg, sim, probes);
          bad.aborted = 1;
          outs[static_cast<std::size_t>(t)] = std::move(bad);
          return;
        }
        const long long after = i + 1 - burn_steps;
        if (after > 0 && after % sim.sample_every == 0) {
          const long long idx = after / sim.sample_every - 1;
          record(o, p, s, static_cast<int>(idx * sim.batches / sim.samples));
        }
      }
      outs[static_cast<std::size_t>(t)] = std::move(o);
    });
  }

  SimOutput total = outs.front();
  for (std::size_t t = 1; t < outs.size(); ++t) total.merge(outs[t]);
  if (total.cov.count() == 0) throw ConvergenceError("every trajectory blew up", {});
  const double drift = std::max(total.cov.drift_sigma(), total.current.drift_sigma());
  total.flagged = total.flagged || drift > 5.0;
  total.finalize_decay();
  return total;
}

}  // namespace kgring
