#include "kgring/diagrams.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "kgring/parallel.hpp"
#include "kgring/summation.hpp"

namespace kgring {

std::string to_string(DiagramId id) {
  switch (id) {
    case DiagramId::G1_FULL: return "G1_FULL";
    case DiagramId::G1_RESONANT: return "G1_RESONANT";
    case DiagramId::G2_WHALE: return "G2_WHALE";
    case DiagramId::G2_WHALE_TADPOLES: return "G2_WHALE_TADPOLES";
    case DiagramId::G2_DOUBLE_TADPOLE: return "G2_DOUBLE_TADPOLE";
  }
  return "?";
}

double fit_degree(const std::vector<std::pair<int, cplx>>& tr) {
  std::vector<double> lx, ly;
  for (std::size_t i = 1; i < tr.size(); ++i) {
    const double inc = std::abs(tr[i].second - tr[i - 1].second);
    if (inc <= 0) continue;
    lx.push_back(std::log(static_cast<double>(tr[i].first)));
    ly.push_back(std::log(inc));
  }
  if (lx.size() < 2) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= lx.size();
  my /= ly.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

std::vector<int> octave_cutoffs(int N, int lowest) {
  std::vector<int> c;
  for (int L = N; L >= lowest; L /= 2) c.push_back(L);
  std::reverse(c.begin(), c.end());
  return c;
}

DiagramInputs::DiagramInputs(const Spectrum& sp, const ModeCovariance& mc, int M)
    : sp_(&sp), mc_(&mc), M_(M > 0 ? M : 4 * sp.N + 2) {
  const int N = sp.N, d = sp.dim();
  MatR B = realbasis::grid_matrix(N, M_);
  MatC Phi(2 * N + 1, d), Pim(2 * N + 1, d);
  for (int j = 0; j < d; ++j) {
    Phi.col(j) = sp.modes[j].phi;
    Pim.col(j) = sp.modes[j].pi;
  }
  E_ = B.cast<cplx>() * Phi;
  Pi_ = B.cast<cplx>() * Pim;
  K_ = E_.conjugate() * mc.St;
  diag_ = (K_.cwiseProduct(E_)).rowwise().sum();
  loop_ = diag_;
}

void DiagramInputs::with_counterterm(const PotentialProfile& v, double g) {
  if (g == 0.0) return;
  auto vg = to_grid(v.vhat, M_);
  for (int j = 0; j < M_; ++j) loop_(j) = diag_(j) - vg.values[j] / (3 * g);
}

VecC DiagramInputs::E_at(double x) const {
  VecR b = realbasis::at(sp_->N, x);
  VecC out(sp_->dim());
  for (int j = 0; j < sp_->dim(); ++j) out(j) = b.cast<cplx>().dot(sp_->modes[j].phi);
  return out;
}

namespace {

int level_of(const EigenMode& m) { return std::max(0, m.label.level()); }

// Accumulates terms into bins by level and produces partial sums at cutoffs.
struct Binned {
  std::vector<int> cutoffs;
  std::vector<NeumaierC> bins;
  explicit Binned(std::vector<int> c) : cutoffs(std::move(c)), bins(cutoffs.size()) {}
  void add(int level, cplx v) {
    auto it = std::lower_bound(cutoffs.begin(), cutoffs.end(), level);
    if (it != cutoffs.end()) bins[it - cutoffs.begin()].add(v);
  }
  std::vector<std::pair<int, cplx>> trace(cplx scale) const {
    std::vector<std::pair<int, cplx>> t;
    cplx run = 0;
    for (std::size_t i = 0; i < bins.size(); ++i) {
      run += bins[i].value();
      t.push_back({cutoffs[i], scale * run});
    }
    return t;
  }
};

DiagramResult finish(DiagramId id, std::vector<std::pair<int, cplx>> tr) {
  DiagramResult r;
  r.id = id;
  r.value = tr.empty() ? cplx(0) : tr.back().second;
  r.degree_fit = fit_degree(tr);
  r.divergent = tr.size() >= 4 && r.degree_fit > 0.5;
  if (tr.size() >= 2) r.last_octave_variation = std::abs(tr.back().second - tr[tr.size() - 2].second);
  r.cutoff_trace = std::move(tr);
  return r;
}

std::vector<int> normalize_cutoffs(std::vector<int> c, int N) {
  if (c.empty()) c = octave_cutoffs(N);
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  for (int L : c)
    if (L > N) throw DomainError("cutoff above truncation level");
  return c;
}

}  // namespace

DiagramResult g1_full(double x, double y, double g, const DiagramInputs& in,
                      std::vector<int> cutoffs) {
  const auto& sp = in.spectrum();
  const int d = sp.dim(), M = in.M();
  cutoffs = normalize_cutoffs(std::move(cutoffs), sp.N);
  // I(n, p) = int loop K_n Pi_p dz
  VecC w = in.loop() * (kTwoPi / M);
  MatC I = in.K().transpose() * w.asDiagonal() * in.Pi();
  VecC ex = in.E_at(x), ey = in.E_at(y);
  Binned bins(cutoffs);
  for (int n = 0; n < d; ++n)
    for (int p = 0; p < d; ++p) {
      const auto& mn = sp.modes[n];
      const auto& mp = sp.modes[p];
      const cplx f = I(n, p) / (mp.pairing * (mn.lambda + mp.lambda));
      bins.add(std::max(level_of(mn), level_of(mp)), (ex(n) * ey(p) + ey(n) * ex(p)) * f);
    }
  return finish(DiagramId::G1_FULL, bins.trace(3 * g));
}

DiagramResult g1_resonant(double x, double y, double g, const DiagramInputs& in, bool paired,
                          std::vector<int> cutoffs) {
  const auto& sp = in.spectrum();
  const int d = sp.dim(), M = in.M();
  cutoffs = normalize_cutoffs(std::move(cutoffs), sp.N);
  VecC w = in.loop() * (kTwoPi / M);
  VecC ex = in.E_at(x), ey = in.E_at(y);
  Binned bins(cutoffs);
  for (int n = 0; n < d; ++n) {
    const auto& mn = sp.modes[n];
    if (!paired && mn.label.kind == ModeKind::Oscillatory && mn.label.branch < 0) continue;
    const int nb = sp.conj_index[n];
    const auto& mb = sp.modes[nb];
    cplx J = 0;
    for (int z = 0; z < M; ++z) J += w(z) * std::conj(in.E()(z, n)) * in.Pi()(z, nb);
    J *= in.modes().St(n, n);
    const cplx f = J / (mb.pairing * (mn.lambda + mb.lambda));
    bins.add(level_of(mn), (ex(n) * ey(nb) + ey(n) * ex(nb)) * f);
  }
  return finish(DiagramId::G1_RESONANT, bins.trace(3 * g));
}

DiagramResult g2_tadpole_divergence(double x, double y, double g, const DiagramInputs& in,
                                    Tadpole which, std::vector<int> cutoffs) {
  const auto& sp = in.spectrum();
  const int d = sp.dim(), M = in.M();
  cutoffs = normalize_cutoffs(std::move(cutoffs), sp.N);
  VecC w = in.loop() * (kTwoPi / M);
  VecC ex = in.E_at(x), ey = in.E_at(y);
  Binned bins(cutoffs);
  auto integral = [&](auto&& f) {
    cplx s = 0;
    for (int z = 0; z < M; ++z) s += w(z) * f(z);
    return s;
  };
  for (int n = 0; n < d; ++n) {
    const int nb = sp.conj_index[n];
    const auto& mn = sp.modes[n];
    const auto& mb = sp.modes[nb];
    const cplx S = in.modes().St(n, n);
    const cplx den = (mn.lambda + mb.lambda) * (mn.lambda + mb.lambda);
    const cplx a = integral([&](int z) { return std::conj(in.E()(z, n)) * in.Pi()(z, nb); });
    cplx third = 0, fourth = 0;
    if (which != Tadpole::Fourth) {
      const cplx b = integral([&](int z) { return in.E()(z, n) * in.Pi()(z, n); });
      third = S * a * b / (mb.pairing * mn.pairing * den) * (ey(nb) * ex(n) + ex(nb) * ey(n));
    }
    if (which != Tadpole::Third) {
      const cplx b = integral([&](int z) { return in.E()(z, nb) * in.Pi()(z, nb); });
      fourth = S * a * b / (mb.pairing * mb.pairing * den) * (ey(n) * ex(nb) + ex(n) * ey(nb));
    }
    const cplx term = which == Tadpole::Third ? third
                      : which == Tadpole::Fourth ? fourth
                                                 : third - fourth;
    bins.add(level_of(mn), term);
  }
  return finish(which == Tadpole::Fourth ? DiagramId::G2_DOUBLE_TADPOLE
                                         : DiagramId::G2_WHALE_TADPOLES,
                bins.trace(9 * g * g));
}

DiagramResult g2_whale(double x, double y, double g, const DiagramInputs& in,
                       std::vector<int> cutoffs, int width) {
  const auto& sp = in.spectrum();
  const int d = sp.dim(), M = in.M();
  if (M < 4 * sp.N + 1) throw DomainError("whale quadrature needs M >= 4N+1");
  cutoffs = normalize_cutoffs(std::move(cutoffs), sp.N);
  const MatC &E = in.E(), &K = in.K(), &Pi = in.Pi();
  VecC ex = in.E_at(x), ey = in.E_at(y);
  VecC lam(d), pr(d);
  std::vector<int> lev(d);
  for (int j = 0; j < d; ++j) {
    lam(j) = sp.modes[j].lambda;
    pr(j) = sp.modes[j].pairing;
    lev[j] = level_of(sp.modes[j]);
  }
  // Upper loop closed over q: W(z, p) = sum_q Pi_q(z) E_q(.) / (pr_q (lam_p + lam_q)).
  MatC Bx(d, d), By(d, d);
  for (int q = 0; q < d; ++q)
    for (int p = 0; p < d; ++p) {
      const cplx den = pr(q) * (lam(p) + lam(q));
      Bx(q, p) = ex(q) / den;
      By(q, p) = ey(q) / den;
    }
  const MatC Wx = Pi * Bx, Wy = Pi * By;
  VecC cx(d), cy(d);
  for (int p = 0; p < d; ++p) {
    cx(p) = ex(p) / pr(p);
    cy(p) = ey(p) / pr(p);
  }

  // Sorted triples n1 <= n2 <= n3 with their multiplicities.
  std::vector<std::array<int, 3>> tri;
  tri.reserve(static_cast<std::size_t>(d) * (d + 1) * (d + 2) / 6);
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b)
      for (int c = b; c < d; ++c) tri.push_back({a, b, c});
  const int chunk = 2048;
  const int nchunks = static_cast<int>((tri.size() + chunk - 1) / chunk);
  std::vector<Binned> parts(nchunks, Binned(cutoffs));
  double min_den = INFINITY;
  std::vector<double> chunk_min(nchunks, INFINITY);

  parallel_for(nchunks, width, [&](int ci) {
    const int t0 = ci * chunk;
    const int c = std::min<int>(chunk, static_cast<int>(tri.size()) - t0);
    MatC U(M, c), P(M, c);
    VecC Lam(c);
    std::vector<int> tl(c);
    VecR mult(c);
    for (int t = 0; t < c; ++t) {
      const auto& [a, b, e] = tri[t0 + t];
      U.col(t) = K.col(a).cwiseProduct(K.col(b)).cwiseProduct(K.col(e));
      P.col(t) = E.col(a).cwiseProduct(E.col(b)).cwiseProduct(E.col(e));
      Lam(t) = lam(a) + lam(b) + lam(e);
      tl[t] = std::max({lev[a], lev[b], lev[e]});
      mult(t) = (a == b && b == e) ? 1.0 : (a == b || b == e) ? 3.0 : 6.0;
    }
    const MatC A = Pi.transpose() * U;
    const MatC Gx = Wx.transpose() * P, Gy = Wy.transpose() * P;
    auto& bins = parts[ci];
    for (int t = 0; t < c; ++t)
      for (int p = 0; p < d; ++p) {
        const cplx den = lam(p) + Lam(t);
        chunk_min[ci] = std::min(chunk_min[ci], std::abs(den));
        const cplx v = mult(t) * A(p, t) * (cy(p) * Gx(p, t) + cx(p) * Gy(p, t)) / den;
        bins.add(std::max(lev[p], tl[t]), v);
      }
  });
  for (double m : chunk_min) min_den = std::min(min_den, m);
  if (min_den < 1e-12) throw DomainError("whale denominator below 1e-12 (defective mode tuple)");

  Binned total(cutoffs);
  for (auto& part : parts)
    for (std::size_t i = 0; i < cutoffs.size(); ++i) total.bins[i].add(part.bins[i].value());
  const double h = kTwoPi / M;
  return finish(DiagramId::G2_WHALE, total.trace(6 * g * g * h * h));
}

TwoPointCorrection two_point_correction(double x, double y, double g, const RunConfig& cfg) {
  TwoPointCorrection out;
  auto fp = solve_fixed_point(g, cfg);
  out.v_star = fp.v;
  auto sp = compute_spectrum(cfg.coupling, fp.v, cfg.N, cfg.root_tol, cfg.parallel_width);
  auto mc = mode_covariance(sp, cfg.temps);
  out.bare = space_time_covariance(sp, mc, x, y, 0.0);
  DiagramInputs in(sp, mc);
  in.with_counterterm(fp.v, g);
  out.first = g1_full(x, y, g, in).value;
  out.whale = g2_whale(x, y, g, in, {}, cfg.parallel_width).value;
  return out;
}

}  // namespace kgring
