#include <doctest.h>

#include "kgring/diagrams.hpp"
#include "support/time_quadrature.hpp"

using namespace kgring;

namespace {

struct Fixture {
  int N;
  Coupling c;
  PotentialProfile v;
  Temperatures T{1.0, 0.5};
  Spectrum sp;
  ModeCovariance mc;
  DiagramInputs in;
  explicit Fixture(int n, double amp = 0.5)
      : N(n),
        c(Coupling::uniform(n, amp, 0.0, kPi / 3)),
        v(PotentialProfile::zero(c, n)),
        sp(compute_spectrum(c, v, n)),
        mc(mode_covariance(sp, T)),
        in(sp, mc) {}
  oracle::QuadratureSetup setup() const { return {c, v, N, T}; }
};

double rel(cplx a, cplx b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_CASE("fit_degree recovers power laws") {
  std::vector<std::pair<int, cplx>> tr;
  double s = 0;
  for (int K = 2; K <= 256; K *= 2) {
    s += 1.0 / (K * K);
    tr.push_back({K, cplx(s, 0)});
  }
  CHECK(fit_degree(tr) == doctest::Approx(-2.0).epsilon(1e-9));
  tr.clear();
  for (int K = 2; K <= 256; K *= 2) tr.push_back({K, cplx(0.0, 3.0 * K)});
  CHECK(fit_degree(tr) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("diagrams vanish at g = 0") {
  Fixture f(6);
  CHECK(std::abs(g1_full(0.3, 1.1, 0.0, f.in).value) == 0.0);
  CHECK(std::abs(g2_whale(0.3, 1.1, 0.0, f.in).value) == 0.0);
  CHECK(std::abs(g2_tadpole_divergence(0.3, 1.1, 0.0, f.in, Tadpole::Third).value) == 0.0);
}

TEST_CASE("g1 closed form matches time quadrature") {
  for (int N : {4, 6}) {
    Fixture f(N);
    const double g = 0.01, x = 0.0, y = kPi / 2;
    const cplx a = g1_full(x, y, g, f.in).value;
    const cplx b = oracle::g1_by_quadrature(f.setup(), g, x, y);
    INFO("N=" << N << " closed=" << a << " quad=" << b);
    CHECK(rel(a, b) < 1e-6);
  }
}

TEST_CASE("whale closed form matches time quadrature") {
  Fixture f(4);
  const double g = 0.01, x = 0.0, y = kPi / 2;
  const cplx a = g2_whale(x, y, g, f.in).value;
  const cplx b = oracle::whale_by_quadrature(f.setup(), g, x, y);
  INFO("closed=" << a << " quad=" << b);
  CHECK(rel(a, b) < 1e-6);
}

TEST_CASE("diagram values are real and symmetric in x, y") {
  Fixture f(8);
  const double g = 0.02, x = 0.4, y = 2.3;
  const cplx a = g1_full(x, y, g, f.in).value, b = g1_full(y, x, g, f.in).value;
  CHECK(std::abs(a.imag()) < 1e-12 * std::abs(a) + 1e-16);
  CHECK(std::abs(a - b) < 1e-12 * std::abs(a));
  const cplx w = g2_whale(x, y, g, f.in).value, w2 = g2_whale(y, x, g, f.in).value;
  CHECK(std::abs(w.imag()) < 1e-10 * std::abs(w));
  CHECK(std::abs(w - w2) < 1e-10 * std::abs(w));
}

TEST_CASE("g1 scales linearly in g, whale quadratically") {
  Fixture f(6);
  const cplx a1 = g1_full(0.1, 0.9, 0.01, f.in).value;
  const cplx a2 = g1_full(0.1, 0.9, 0.03, f.in).value;
  CHECK(std::abs(a2 - 3.0 * a1) < 1e-12 * std::abs(a2));
  const cplx w1 = g2_whale(0.1, 0.9, 0.01, f.in).value;
  const cplx w2 = g2_whale(0.1, 0.9, 0.03, f.in).value;
  CHECK(std::abs(w2 - 9.0 * w1) < 1e-10 * std::abs(w2));
}

TEST_CASE("whale is independent of the thread count") {
  Fixture f(8);
  const cplx a = g2_whale(0.0, 1.0, 0.01, f.in, {}, 1).value;
  const cplx b = g2_whale(0.0, 1.0, 0.01, f.in, {}, 3).value;
  CHECK(a == b);
}

TEST_CASE("convergence and divergence at moderate N") {
  Fixture f(32);
  const double g = 0.01;
  auto full = g1_full(0.0, 0.0, g, f.in);
  CHECK(full.degree_fit < -1.0);
  CHECK_FALSE(full.divergent);

  auto paired = g1_resonant(0.0, 0.0, g, f.in, true);
  CHECK(paired.degree_fit < -1.0);
  // one branch alone: each term ~ 1/n, the partial sums grow like log K
  auto unpaired = g1_resonant(0.0, 0.0, g, f.in, false);
  CHECK(std::abs(unpaired.degree_fit) < 0.3);

  auto third = g2_tadpole_divergence(0.0, 0.0, g, f.in, Tadpole::Third);
  auto fourth = g2_tadpole_divergence(0.0, 0.0, g, f.in, Tadpole::Fourth);
  auto diff = g2_tadpole_divergence(0.0, 0.0, g, f.in, Tadpole::Difference);
  CHECK(third.degree_fit > 0.5);
  CHECK(fourth.degree_fit > 0.5);
  CHECK(diff.divergent);
  CHECK(std::abs(diff.value - (third.value - fourth.value)) < 1e-12 * std::abs(diff.value));
}

TEST_CASE("whale partial sums settle") {
  Fixture f(16);
  auto w = g2_whale(0.0, 0.0, 0.01, f.in);
  CHECK(w.degree_fit < 0.0);
  CHECK_FALSE(w.divergent);
}

TEST_CASE("two-point correction reduces to the covariance at g = 0") {
  RunConfig cfg;
  cfg.N = 6;
  cfg.M = 4 * 6 + 2;
  cfg.g = 0.0;
  cfg.coupling = Coupling::uniform(6, 0.5, 0.0, kPi / 3);
  cfg.temps = {1.0, 0.5};
  auto tp = two_point_correction(0.2, 1.7, 0.0, cfg);
  auto sp = compute_spectrum(cfg.coupling, PotentialProfile::zero(cfg.coupling, 6), 6);
  auto mc = mode_covariance(sp, cfg.temps);
  CovarianceField cf(sp, mc, cfg.M);
  CHECK(std::abs(tp.bare - cf(0.2, 1.7, 0.0)) < 1e-12);
  CHECK(std::abs(tp.first) == 0.0);
  CHECK(std::abs(tp.whale) == 0.0);
}

TEST_CASE("at the fixed point the first-order tadpole is cancelled") {
  RunConfig cfg;
  cfg.N = 8;
  cfg.M = 4 * 8 + 2;
  cfg.g = 0.01;
  cfg.coupling = Coupling::uniform(8, 0.5, 0.0, kPi / 3);
  cfg.temps = {1.0, 0.5};
  auto tp = two_point_correction(0.0, 0.5, cfg.g, cfg);
  // loop = C(z,z,0) - v/(3g) vanishes up to the fixed-point residual
  CHECK(std::abs(tp.first) < 1e-6 * std::abs(tp.bare));
  CHECK(std::abs(tp.whale) > 0.0);
  CHECK(std::abs(tp.whale) < 1e-2 * std::abs(tp.bare));
  CHECK(std::abs(tp.total().imag()) < 1e-10);
}
