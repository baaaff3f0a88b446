#include "kgring/renorm.hpp"

#include <cmath>
#include <sstream>

namespace kgring {

double sup_norm(const CoeffSeq& h, int M) {
  double s = 0;
  for (auto z : to_grid(h, M).values) s = std::max(s, std::abs(z));
  return s;
}

double FixpointTrace::observed_ratio() const {
  if (contraction_ratios.empty()) return 0.0;
  double l = 0;
  for (double r : contraction_ratios) l += std::log(r);
  return std::exp(l / contraction_ratios.size());
}

namespace {
CoeffSeq symmetrize(CoeffSeq h) {
  for (int k = 0; k <= h.N(); ++k) {
    cplx a = 0.5 * (h(k) + std::conj(h(-k)));
    h(k) = a;
    h(-k) = std::conj(a);
  }
  h(0) = h(0).real();
  h.set_real_valued(true);
  return h;
}

CoeffSeq combine(const CoeffSeq& a, double wa, const CoeffSeq& b, double wb) {
  CoeffSeq out(a.N(), true);
  for (int k = -a.N(); k <= a.N(); ++k) out(k) = wa * a(k) + wb * b(k);
  return out;
}
}  // namespace

PotentialProfile tilde_v(const PotentialProfile& v, const RunConfig& cfg) {
  auto sp = compute_spectrum(cfg.coupling, v, cfg.N, cfg.root_tol, cfg.parallel_width);
  auto mc = mode_covariance(sp, cfg.temps);
  auto diag = equal_time_diag(sp, mc, cfg.M);
  auto c = symmetrize(from_grid(diag, 2 * cfg.N));
  return PotentialProfile::make(c, cfg.coupling, cfg.N, cfg.eps0, cfg.M);
}

FixpointResult solve_fixed_point(double g, const RunConfig& cfg, int max_iter) {
  FixpointResult out;
  auto& tr = out.trace;
  const int M = cfg.M;
  PotentialProfile v = PotentialProfile::zero(cfg.coupling, cfg.N, cfg.eps0);
  v = PotentialProfile::make(v.vhat, cfg.coupling, cfg.N, cfg.eps0, M);

  auto target_of = [&](const PotentialProfile& p) {
    auto t = tilde_v(p, cfg);
    CoeffSeq s = combine(t.vhat, 3 * g, t.vhat, 0.0);
    return s;
  };
  auto residual_of = [&](const PotentialProfile& p, const CoeffSeq& target) {
    return sup_norm(combine(p.vhat, 1.0, target, -1.0), M);
  };

  CoeffSeq target = target_of(v);
  if (sup_norm(target, M) > v.ball_radius) {
    std::ostringstream os;
    os << "3g |vtilde_0| = " << sup_norm(target, M) << " exceeds the ball radius "
       << v.ball_radius << "; use a smaller g";
    throw DomainError(os.str());
  }
  double res = residual_of(v, target), omega = 1.0;
  tr.iterates.push_back({v, res, omega});

  for (int it = 0; it < max_iter; ++it) {
    if (res <= cfg.fixpoint_tol) {
      tr.converged = true;
      out.v = v;
      return out;
    }
    for (;;) {
      auto cand = PotentialProfile::make(combine(v.vhat, 1 - omega, target, omega), cfg.coupling,
                                         cfg.N, cfg.eps0, M);
      if (!cand.in_ball()) {
        if (omega < 1e-3) {
          std::ostringstream os;
          os << "iterate left the ball (|v| = " << cand.sup_norm << " > " << cand.ball_radius
             << ") after " << tr.iterates.size() << " iterates";
          throw ConvergenceError(os.str());
        }
        omega *= 0.5;
        continue;
      }
      CoeffSeq ct = target_of(cand);
      const double cres = residual_of(cand, ct);
      if (cres > res && omega > 1e-3) {
        omega *= 0.5;
        continue;
      }
      if (res > 1e-11 && cres > 1e-11) tr.contraction_ratios.push_back(cres / res);
      v = cand;
      target = ct;
      res = cres;
      tr.iterates.back().omega = omega;
      tr.iterates.push_back({v, res, omega});
      break;
    }
  }
  if (res <= cfg.fixpoint_tol) {
    tr.converged = true;
    out.v = v;
    return out;
  }
  std::vector<std::string> lines;
  for (auto& i : tr.iterates) lines.push_back("residual " + std::to_string(i.residual));
  throw ConvergenceError("fixed point not reached in " + std::to_string(max_iter) + " iterations",
                         lines);
}

LipschitzProbe lipschitz_probe(const PotentialProfile& v1, const PotentialProfile& v2,
                               const RunConfig& cfg) {
  const int N = std::max(v1.vhat.N(), v2.vhat.N());
  CoeffSeq dv = combine(v2.vhat.resized(N), 1.0, v1.vhat.resized(N), -1.0);
  const double den = sup_norm(dv, cfg.M);
  if (den == 0.0) return {0.0, true};
  auto t1 = tilde_v(v1, cfg), t2 = tilde_v(v2, cfg);
  return {sup_norm(combine(t2.vhat, 1.0, t1.vhat, -1.0), cfg.M) / den, false};
}

}  // namespace kgring
