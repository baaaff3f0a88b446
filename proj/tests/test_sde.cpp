#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "kgring/sde.hpp"

using namespace kgring;

namespace {

RunConfig small_config(int N, double T1, double T2, std::uint64_t seed = 7) {
  RunConfig cfg;
  cfg.N = N;
  cfg.M = 8 * N;
  cfg.coupling = Coupling::uniform(N, 0.5, 0.0, kPi / 3);
  cfg.temps = {T1, T2};
  cfg.seed = seed;
  return cfg;
}

MatR stationary_real(const RunConfig& cfg) {
  const auto v = PotentialProfile::zero(cfg.coupling, cfg.N);
  const MatR A = build_real_operator(cfg.coupling, v, cfg.N);
  return solve_lyapunov(A.cast<cplx>(), diffusion_matrix(cfg.N, cfg.temps).cast<cplx>()).real();
}

// stationary mean current from the phi-pi block of the covariance
double current_from_covariance(const MatR& S, int N) {
  const int n = 2 * N + 1;
  double acc = 0;
  for (int k = 1; k <= N; ++k)
    acc += k * (S(n + 2 * k - 1, 2 * k) - S(n + 2 * k, 2 * k - 1));
  return acc / kTwoPi;
}

}  // namespace

TEST_CASE("counter rng is deterministic and standard normal") {
  CounterRng a(42, 3), b(42, 3), c(43, 3);
  CHECK(a.normal(10, 5) == b.normal(10, 5));
  CHECK(a.normal(10, 5) != c.normal(10, 5));
  CHECK(a.normal(10, 5) != a.normal(11, 5));
  const int n = 200000;
  double s = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = a.normal(static_cast<std::uint64_t>(i), 0);
    s += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  CHECK(std::abs(s / n) < 4 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1) < 4 * std::sqrt(2.0 / n));
  CHECK(std::abs(s4 / n - 3) < 4 * std::sqrt(96.0 / n));
}

TEST_CASE("linear flow matches the matrix exponential and the stationary law") {
  auto cfg = small_config(3, 1.5, 0.5);
  const auto v = PotentialProfile::zero(cfg.coupling, cfg.N);
  const MatR A = build_real_operator(cfg.coupling, v, cfg.N);
  const MatR S = stationary_real(cfg);
  for (double dt : {0.1, 3.0, 200.0}) {
    LinearFlow f(cfg.coupling, v, cfg.N, cfg.temps, dt);
    const MatR F = (A * dt).exp();
    CHECK((f.F() - F).norm() < 1e-9 * std::max(1.0, F.norm()));
    const MatR Qdt = S - F * S * F.transpose();
    CHECK((f.Qdt() - Qdt).norm() < 1e-9 * S.norm());
    CHECK((f.noise_factor() * f.noise_factor().transpose() - f.Qdt()).norm() < 1e-10 * S.norm());
  }
}

TEST_CASE("decoupled zero-temperature flow conserves energy") {
  const int N = 5;
  auto c = Coupling::uniform(N, 0.0, 0.0, 0.0);
  const auto v = PotentialProfile::zero(c, N);
  LinearFlow f(c, v, N, {0.0, 0.0}, 0.05);
  StateVector s = StateVector::zero(N);
  for (int j = 0; j < s.n(); ++j) s.x(j) = std::sin(1.0 + j), s.x(s.n() + j) = std::cos(2.0 * j);
  const double e0 = energy(s);
  VecR xi = VecR::Zero(s.x.size());
  for (int i = 0; i < 1000; ++i) s = step_linear(s, f, xi);
  CHECK(std::abs(energy(s) - e0) < 1e-10 * e0);
}

TEST_CASE("coupled zero-temperature flow dissipates energy") {
  auto cfg = small_config(4, 0.0, 0.0);
  const auto v = PotentialProfile::zero(cfg.coupling, cfg.N);
  LinearFlow f(cfg.coupling, v, cfg.N, cfg.temps, 0.1);
  StateVector s = StateVector::zero(cfg.N);
  for (Eigen::Index j = 0; j < s.x.size(); ++j) s.x(j) = std::cos(0.7 * j);
  VecR xi = VecR::Zero(s.x.size());
  double prev = energy(s);
  const double e0 = prev;
  bool monotone = true;
  for (int i = 0; i < 500; ++i) {
    s = step_linear(s, f, xi);
    const double e = energy(s);
    monotone = monotone && e <= prev * (1 + 1e-13);
    prev = e;
  }
  CHECK(monotone);
  CHECK(prev < e0);
}

TEST_CASE("one-step law of a mode coordinate") {
  auto cfg = small_config(3, 1.0, 2.0);
  const auto v = PotentialProfile::zero(cfg.coupling, cfg.N);
  const Spectrum sp = compute_spectrum(cfg.coupling, v, cfg.N);
  const double dt = 0.7;
  LinearFlow flow(cfg.coupling, v, cfg.N, cfg.temps, dt);
  const MatR Q = diffusion_matrix(cfg.N, cfg.temps);
  StateVector s = StateVector::zero(cfg.N);
  for (Eigen::Index j = 0; j < s.x.size(); ++j) s.x(j) = 0.3 * std::sin(1.3 * j + 0.2);
  for (auto& m : sp.modes) {
    const VecC f = m.left();
    const cplx l = m.lambda;
    const cplx mean = f.dot((flow.F() * s.x).cast<cplx>());
    CHECK(std::abs(mean - std::exp(dt * l) * f.dot(s.x.cast<cplx>())) < 1e-8);
    const double var = f.dot(flow.Qdt().cast<cplx>() * f).real();
    const double q = f.dot(Q.cast<cplx>() * f).real();
    const double expect = q * (std::exp(2 * dt * l.real()) - 1) / (2 * l.real());
    CHECK(std::abs(var - expect) < 1e-8 * std::max(1.0, expect));
  }
  // sampled second moment of one coordinate
  const auto& m = sp.modes[sp.index_of({ModeKind::Oscillatory, 2, 1, 0})];
  const VecC f = m.left();
  const CounterRng rng(99, 0);
  VecR xi(s.x.size());
  const int n = 100000;
  double s1 = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    rng.fill(static_cast<std::uint64_t>(i), 0, xi);
    const double a = std::norm(f.dot((flow.noise_factor() * xi).cast<cplx>()));
    s1 += a;
    s2 += a * a;
  }
  const double mu = s1 / n, se = std::sqrt((s2 / n - mu * mu) / n);
  const double expect = f.dot(flow.Qdt().cast<cplx>() * f).real();
  CHECK(std::abs(mu - expect) < 3 * se);
}

TEST_CASE("nonlinear step at g = 0 reproduces the linear flow") {
  auto cfg = small_config(4, 1.0, 0.5);
  const auto v = PotentialProfile::zero(cfg.coupling, cfg.N);
  const double dt = max_nonlinear_dt(cfg.N);
  NonlinearStepper ns(cfg.coupling, v, cfg.N, cfg.temps, dt, 0.0);
  LinearFlow half(cfg.coupling, v, cfg.N, cfg.temps, 0.5 * dt);
  StateVector a = StateVector::zero(cfg.N), b = a;
  const CounterRng rng(5, 0);
  VecR x1(a.x.size()), x2(a.x.size());
  for (std::uint64_t i = 0; i < 200; ++i) {
    rng.fill(i, 0, x1);
    rng.fill(i, 1, x2);
    REQUIRE(ns.step(a, x1, x2));
    b = step_linear(step_linear(b, half, x1), half, x2);
  }
  CHECK((a.x - b.x).norm() < 1e-9 * std::max(1.0, b.x.norm()));
}

TEST_CASE("nonlinear deterministic energy error is second order in dt") {
  const int N = 4;
  const double g = 0.5;
  auto c = Coupling::uniform(N, 0.0, 0.0, 0.0);
  const auto v = PotentialProfile::zero(c, N);
  auto drift = [&](double dt) {
    NonlinearStepper ns(c, v, N, {0.0, 0.0}, dt, g);
    StateVector s = StateVector::zero(N);
    s.x(1) = 0.8;
    s.x(4) = 0.5;
    s.x(s.n() + 2) = 0.4;
    const double e0 = energy(s, g);
    VecR z = VecR::Zero(s.x.size());
    double worst = 0;
    const int steps = static_cast<int>(std::lround(5.0 / dt));
    for (int i = 0; i < steps; ++i) {
      REQUIRE(ns.step(s, z, z));
      worst = std::max(worst, std::abs(energy(s, g) - e0));
    }
    return worst;
  };
  const double e1 = drift(0.05), e2 = drift(0.025);
  CHECK(e1 > 0);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.35));
}

TEST_CASE("nonlinear stepper guards") {
  auto cfg = small_config(4, 1.0, 1.0);
  const auto v = PotentialProfile::zero(cfg.coupling, cfg.N);
  CHECK_THROWS_AS(NonlinearStepper(cfg.coupling, v, cfg.N, cfg.temps, 0.2, 1.0), DomainError);
  CHECK_THROWS_AS(NonlinearStepper(cfg.coupling, v, cfg.N, cfg.temps, 0.05, 1.0, 12), DomainError);
  // focusing cubic from a large state runs away
  NonlinearStepper ns(cfg.coupling, v, cfg.N, cfg.temps, 0.1, -50.0);
  StateVector s = StateVector::zero(cfg.N);
  s.x(0) = 40.0;
  VecR z = VecR::Zero(s.x.size());
  bool ok = true;
  for (int i = 0; i < 200 && ok; ++i) ok = ns.step(s, z, z);
  CHECK_FALSE(ok);
}

TEST_CASE("state stays real in Fourier coordinates") {
  StateVector s = StateVector::zero(3);
  for (Eigen::Index j = 0; j < s.x.size(); ++j) s.x(j) = std::sin(0.9 * j);
  CHECK(s.phihat().reality_defect() < 1e-12);
  CHECK(s.pihat().reality_defect() < 1e-12);
}

TEST_CASE("batch accumulators merge associatively") {
  auto make = [](int seed) {
    BatchStats b(2, 8);
    CounterRng r(static_cast<std::uint64_t>(seed), 0);
    VecR v(2);
    for (int i = 0; i < 800; ++i) {
      v << r.normal(static_cast<std::uint64_t>(i), 0) * 1e3, r.normal(static_cast<std::uint64_t>(i), 1) * 1e-3;
      b.add(i / 100, v);
    }
    return b;
  };
  BatchStats a = make(1), b = make(2), c = make(3);
  BatchStats left = a, bc = b;
  left.merge(b);
  left.merge(c);
  bc.merge(c);
  BatchStats right = a;
  right.merge(bc);
  for (int k = 0; k < 2; ++k) {
    CHECK(std::abs(left.mean(k) - right.mean(k)) <= 1e-12 * std::max(1.0, std::abs(left.mean(k))));
    CHECK(std::abs(left.se(k) - right.se(k)) <= 1e-12 * left.se(k));
  }
  CHECK(left.count() == 2400);
}

TEST_CASE("stationary run is reproducible per seed") {
  auto cfg = small_config(3, 1.0, 0.5, 11);
  SimConfig sim;
  sim.samples = 2000;
  sim.batches = 20;
  auto a = run_stationary(cfg, sim);
  auto b = run_stationary(cfg, sim);
  for (int k = 0; k < a.cov.observables(); ++k) CHECK(a.cov.mean(k) == b.cov.mean(k));
  CHECK(a.current.mean(0) == b.current.mean(0));
  cfg.seed = 12;
  auto c = run_stationary(cfg, sim);
  CHECK(a.cov.mean(0) != c.cov.mean(0));
  sim.trajectories = 3;
  sim.width = 2;
  auto d1 = run_stationary(cfg, sim);
  sim.width = 1;
  auto d2 = run_stationary(cfg, sim);
  CHECK(d1.cov.mean(0) == d2.cov.mean(0));
}

TEST_CASE("linear run reproduces the analytic stationary statistics") {
  auto cfg = small_config(4, 2.0, 1.0, 2024);
  SimConfig sim;
  sim.samples = 40000;
  sim.decay = true;
  auto out = run_stationary(cfg, sim);
  CHECK_FALSE(out.flagged);
  const auto v = PotentialProfile::zero(cfg.coupling, cfg.N);
  const Spectrum sp = compute_spectrum(cfg.coupling, v, cfg.N);
  const ModeCovariance mc = mode_covariance(sp, cfg.temps);
  CovarianceField cf(sp, mc, cfg.M);
  for (std::size_t q = 0; q < out.pairs.size(); ++q) {
    const auto [i, j] = out.pairs[q];
    const double c = cf(out.probes[static_cast<std::size_t>(i)], out.probes[static_cast<std::size_t>(j)], 0.0).real();
    CHECK(std::abs(out.cov.mean(static_cast<int>(q)) - c) < 4 * out.cov.se(static_cast<int>(q)));
  }
  const double J = current_from_covariance(stationary_real(cfg), cfg.N);
  CHECK(std::abs(J) > 10 * out.current.se(0));
  CHECK(std::abs(out.current.mean(0) - J) < 4 * out.current.se(0));
  for (auto& d : out.decay_modes) {
    INFO(d.label.str() << " rate " << d.rate << " Re lambda " << d.lambda.real() << " se " << d.se);
    CHECK(std::abs(d.rate - d.lambda.real()) < 4 * d.se);
  }
}

TEST_CASE("equilibrium: no current, phi and pi uncorrelated") {
  auto cfg = small_config(4, 1.0, 1.0, 77);
  CHECK(std::abs(current_from_covariance(stationary_real(cfg), cfg.N)) < 1e-12);
  SimConfig sim;
  sim.samples = 20000;
  auto out = run_stationary(cfg, sim);
  CHECK(std::abs(out.current.mean(0)) < 4 * out.current.se(0));
  for (int q = 0; q < out.cross.observables(); ++q)
    CHECK(std::abs(out.cross.mean(q)) < 4 * out.cross.se(q));
}
