#include <doctest.h>

#include <json.hpp>

#include "kgring/validate.hpp"

using namespace kgring;

namespace {

Spectrum spectrum_for(int N, double theta2 = kPi / 3, const CoeffSeq* vhat = nullptr) {
  auto c = Coupling::uniform(N, 0.5, 0.0, theta2);
  auto v = vhat ? PotentialProfile::make(*vhat, c, N, 0.1) : PotentialProfile::zero(c, N);
  return compute_spectrum(c, v, N);
}

CoeffSeq small_potential(double scale, int shift) {
  CoeffSeq a(3, true);
  a(0) = scale;
  a(1 + shift % 2) = cplx(0.4 * scale, 0.2 * scale);
  a(-1 - shift % 2) = std::conj(a(1 + shift % 2));
  a(3) = cplx(-0.1 * scale, 0.3 * scale);
  a(-3) = std::conj(a(3));
  return a;
}

}  // namespace

TEST_CASE("estimate (i) closed form against brute-force sums") {
  CHECK(estimate_i_exact(0) == doctest::Approx(kPi * kPi / 6).epsilon(1e-15));
  for (int n : {0, 1, 2, 7, 40}) {
    // independent direct sum over m != n, m >= 0, far enough out that the rest is < 1e-7
    double direct = 0;
    for (long m = 20000000; m >= 0; --m)
      if (m != n) direct += 1.0 / std::abs(static_cast<double>(m * m) - static_cast<double>(n) * n);
    CHECK(estimate_i_exact(n) == doctest::Approx(direct).epsilon(1e-6));
    const double up = estimate_i_partial(n, 100000);
    CHECK(up >= estimate_i_exact(n));
    CHECK(up - estimate_i_exact(n) < 1e-4);
  }
}

TEST_CASE("estimate sums hold with a stable constant up to n = 1e4") {
  auto r = check_estimate_sums(10000, 0.9);
  CHECK(r.pass);
  CHECK(r.constant("c_gamma_i") >= kPi * kPi / 6);
  CHECK(r.constant("eta_exponent_ii") >= 0.9 - 0.05);
  // the constant fitted on n <= 100 already covers n <= 1e4
  auto small = check_estimate_sums(1000, 0.9);
  CHECK(std::abs(small.constant("c_gamma_i") / r.constant("c_gamma_i") - 1) < kFitAllowance);
  CHECK_THROWS_AS(check_estimate_sums(100, 1.0), DomainError);
}

TEST_CASE("estimate (ii) vanishes as eta -> 0") {
  const double a = estimate_ii_partial(3, 1e-2, 100000), b = estimate_ii_partial(3, 1e-3, 100000);
  CHECK(b < a);
  CHECK(b < 0.02);
  // eta = 1 is sum (i) without the m = 0 term
  CHECK(estimate_ii_partial(5, 1.0, 100000) ==
        doctest::Approx(estimate_i_partial(5, 100000) - 1.0 / 25).epsilon(1e-6));
}

TEST_CASE("eigenvalue splitting constant is positive and N-stable") {
  auto a = check_eigen_splitting(spectrum_for(16)), b = check_eigen_splitting(spectrum_for(32));
  CHECK(a.pass);
  CHECK(b.pass);
  CHECK(a.constant("c0") > 0);
  CHECK(std::abs(a.constant("c0") / b.constant("c0") - 1) < kFitAllowance);
  // the level-n Gram matrix of (a, a e^{i theta}) splits like |cos theta|,
  // so theta near pi/2 is close to degenerate
  auto c = check_eigen_splitting(spectrum_for(16, 5 * kPi / 12));
  CHECK(c.constant("c0") > 0);
  CHECK(c.constant("c0") < a.constant("c0"));
  // a small potential reduces but keeps the splitting
  const CoeffSeq vh = small_potential(0.01, 0);
  auto d = check_eigen_splitting(spectrum_for(16, kPi / 3, &vh));
  CHECK(d.pass);
  CHECK(d.constant("c0") > 0);
}

TEST_CASE("splitting is vacuous without coupling") {
  auto c = Coupling::uniform(6, 0.0, 0.0, 0.0);
  auto sp = compute_spectrum(c, PotentialProfile::zero(c, 6), 6);
  auto r = check_eigen_splitting(sp);
  CHECK(r.skipped);
  CHECK(r.rows.empty());
}

TEST_CASE("eigenfunction bounds are uniform in n") {
  auto a = check_eigenfunction_bounds(spectrum_for(16), 0.9);
  auto b = check_eigenfunction_bounds(spectrum_for(32), 0.9);
  CHECK(a.pass);
  CHECK(b.pass);
  for (auto name : {"alpha_psi_bound", "sup_bound", "holder_c", "conj_c"}) {
    INFO(name);
    CHECK(std::abs(a.constant(name) / b.constant(name) - 1) < kFitAllowance);
  }
  // L2-normalized functions: sup|psi| >= 1/sqrt(2 pi)
  for (auto& row : b.rows)
    if (row.which == 1) CHECK(row.value >= 1 / std::sqrt(kTwoPi) - 1e-12);
  // conjugate distance shrinks with n
  double d8 = 0, d32 = 0;
  for (auto& row : b.rows)
    if (row.which == 3) {
      if (row.n == 8) d8 = row.value;
      if (row.n == 32) d32 = row.value;
    }
  CHECK(d32 < 0.5 * d8);
}

TEST_CASE("pairing bounds and the pi-component form") {
  auto sp = spectrum_for(24);
  auto r = check_pairing_bounds(sp);
  CHECK(r.pass);
  CHECK(r.constant("c_lower") > 0);
  CHECK(r.constant("c_lower") < 1);
  CHECK(r.constant("pi_form_rel_error") < 1e-12);
  CHECK(r.constant("phase_defect_top_level") < 1e-3);
  for (auto& row : r.rows)
    if (row.which == 1) CHECK(row.value <= 1.0 + 1e-14);
  auto r2 = check_pairing_bounds(spectrum_for(48));
  CHECK(std::abs(r.constant("c_lower") / r2.constant("c_lower") - 1) < kFitAllowance);
}

TEST_CASE("v-Lipschitz bounds") {
  const int N = 16;
  auto c = Coupling::uniform(N, 0.5, 0.0, kPi / 3);
  const auto v1 = PotentialProfile::make(small_potential(0.01, 0), c, N, 0.1);
  const auto v2 = PotentialProfile::make(small_potential(-0.006, 1), c, N, 0.1);
  auto same = check_v_lipschitz(c, v1, v1, N);
  CHECK(same.pass);
  CHECK(same.constant("dv_sup") == 0.0);
  auto r = check_v_lipschitz(c, v1, v2, N);
  CHECK(r.pass);
  // (iii) is sharper than (ii): real shift is a vanishing fraction at high n
  CHECK(r.constant("re_over_full_top_level") < 0.05);
  const auto v3 = PotentialProfile::make(small_potential(0.004, 1), c, N, 0.1);
  auto r3 = check_v_lipschitz(c, v1, v3, N);
  CHECK(r3.pass);
  for (auto name : {"C_phi", "C_lambda_ii", "C_lambda_iii"}) {
    INFO(name);
    CHECK(std::abs(r.constant(name) / r3.constant(name) - 1) < 1.0);
  }
}

TEST_CASE("first-order eigenvalue shift matches finite differences") {
  const int N = 8;
  auto c = Coupling::uniform(N, 0.5, 0.0, kPi / 3);
  const CoeffSeq a = small_potential(0.01, 0), b = small_potential(-0.006, 1);
  auto along = [&](double t) {
    CoeffSeq v(3, true);
    for (int k = -3; k <= 3; ++k) v(k) = a(k) + t * (b(k) - a(k));
    return PotentialProfile::make(v, c, N, 0.1);
  };
  const auto v1 = along(0.0), v2 = along(1.0);
  const Spectrum s0 = compute_spectrum(c, v1, N);
  const MatR dv = potential_difference_matrix(c, v1, v2, N);
  for (double h : {1e-2, 5e-3}) {
    const Spectrum sp = compute_spectrum(c, along(h), N), sm = compute_spectrum(c, along(-h), N);
    for (auto& m : s0.modes) {
      if (m.label.kind != ModeKind::Oscillatory) continue;
      const cplx fd = (sp.modes[sp.index_of(m.label)].lambda - sm.modes[sm.index_of(m.label)].lambda) / (2 * h);
      const cplx an = eigenvalue_derivative(m, s0.blocks, dv);
      INFO(m.label.str() << " fd=" << fd << " analytic=" << an << " h=" << h);
      CHECK(std::abs(fd - an) < 1e-6 * std::max(std::abs(an), 1e-3));
    }
  }
}

TEST_CASE("reports serialize") {
  auto r = check_eigen_splitting(spectrum_for(8));
  auto j = nlohmann::json::parse(report_to_json(r));
  CHECK(j["id"] == "eigen_splitting");
  CHECK(j["pass"] == true);
  CHECK(j["rows"].size() == r.rows.size());
  CHECK(j["constants"]["c0"].get<double>() == doctest::Approx(r.constant("c0")));
}
