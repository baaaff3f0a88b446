#include "kgring/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace kgring {

using json = nlohmann::json;

std::array<cplx, 2> Coupling::at(int n) const {
  auto get = [n](const CoeffSeq& a) { return std::abs(n) <= a.N() ? a(n) : cplx(0); };
  return {get(alpha1), get(alpha2)};
}

Coupling Coupling::band(int N) const {
  Coupling c = *this;
  c.alpha1 = alpha1.resized(N);
  c.alpha2 = alpha2.resized(N);
  return c;
}

double Coupling::sup_sq(int N) const {
  double m = 0;
  for (int n = -N; n <= N; ++n) {
    auto a = at(n);
    m = std::max(m, std::norm(a[0]) + std::norm(a[1]));
  }
  return m;
}

Coupling Coupling::uniform(int N, double a, double theta1, double theta2, double c0,
                           double c1, double c2) {
  Coupling c;
  c.alpha1 = CoeffSeq(N, true);
  c.alpha2 = CoeffSeq(N, true);
  for (int n = -N; n <= N; ++n) {
    int s = (n > 0) - (n < 0);
    c.alpha1(n) = std::polar(a, theta1 * s);
    c.alpha2(n) = std::polar(a, theta2 * s);
  }
  c.c0 = c0;
  c.c1 = c1;
  c.c2 = c2;
  return c;
}

std::string CouplingReport::summary() const {
  if (ok()) return "coupling ok";
  std::ostringstream os;
  os << violations.size() << " violation(s); first: n=" << violations.front().n
     << " inequality " << violations.front().inequality << ": " << violations.front().message;
  return os.str();
}

CouplingReport validate_coupling(const Coupling& coupling, int N) {
  CouplingReport rep;
  const bool real = coupling.alpha1.real_valued() && coupling.alpha2.real_valued();
  for (int n = -N; n <= N; ++n) {
    auto a = coupling.at(n);
    CouplingRow row{};
    row.n = n;
    row.bilinear = std::abs(a[0] * a[0] + a[1] * a[1]);
    row.hermitian = std::norm(a[0]) + std::norm(a[1]);
    row.margin[0] = row.bilinear - coupling.c1;
    row.margin[1] = coupling.c2 * row.hermitian - row.bilinear;
    row.margin[2] = coupling.c0 - row.hermitian;
    if (real && n == 0) row.margin[1] = 0.0;
    rep.rows.push_back(row);

    auto fail = [&](int idx, const std::string& what) {
      rep.violations.push_back({n, idx, what});
    };
    std::ostringstream os;
    if (row.margin[0] < 0) {
      os << "|a.a| = " << row.bilinear << " < c1 = " << coupling.c1;
      fail(1, os.str());
    }
    if (row.margin[1] < 0) {
      std::ostringstream o2;
      o2 << "|a.a| = " << row.bilinear << " > c2 a*.a = " << coupling.c2 * row.hermitian;
      fail(2, o2.str());
    }
    if (row.margin[2] < 0) {
      std::ostringstream o3;
      o3 << "a*.a = " << row.hermitian << " > c0 = " << coupling.c0;
      fail(3, o3.str());
    }
  }
  return rep;
}

PotentialProfile PotentialProfile::make(const CoeffSeq& vhat, const Coupling& coupling, int N,
                                        double eps0, int M) {
  PotentialProfile p;
  p.vhat = vhat;
  p.vhat.set_real_valued(true);
  if (M <= 0) M = std::max(8 * std::max(N, vhat.N()), 2 * vhat.N() + 1);
  auto u = to_grid(p.vhat, M);
  for (auto z : u.values) p.sup_norm = std::max(p.sup_norm, std::abs(z));
  p.ball_radius = eps0 * coupling.sup_sq(N);
  return p;
}

PotentialProfile PotentialProfile::zero(const Coupling& coupling, int N, double eps0) {
  return make(CoeffSeq(2 * N, true), coupling, N, eps0);
}

void RunConfig::check() const {
  if (N < 1) throw ConfigError("model.N", "must be >= 1");
  if (M < 8 * N) throw ConfigError("model.M", "must be >= 8N = " + std::to_string(8 * N));
  if (!(root_tol > 0)) throw ConfigError("tol.root", "must be positive");
  if (!(fixpoint_tol > 0)) throw ConfigError("tol.fixpoint", "must be positive");
  if (!(tail_tol > 0)) throw ConfigError("tol.tail", "must be positive");
  if (temps.T1 < 0) throw ConfigError("temps.T1", "must be nonnegative");
  if (temps.T2 < 0) throw ConfigError("temps.T2", "must be nonnegative");
  if (!(coupling.c1 < coupling.c2 && coupling.c2 < 1 && coupling.c1 > 0 && coupling.c0 > 0))
    throw ConfigError("coupling", "need 0 < c1 < c2 < 1 and c0 > 0");
  if (parallel_width < 1) throw ConfigError("parallel.width", "must be >= 1");
}

namespace {

const json& require(const json& j, const std::string& path) {
  const json* cur = &j;
  std::size_t start = 0;
  while (start <= path.size()) {
    auto dot = path.find('.', start);
    auto key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!cur->is_object() || !cur->contains(key)) throw ConfigError(path, "missing key");
    cur = &(*cur)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return *cur;
}

const json* optional(const json& j, const std::string& path) {
  try {
    return &require(j, path);
  } catch (const ConfigError&) {
    return nullptr;
  }
}

template <class T>
T get_as(const json& j, const std::string& path) {
  try {
    return require(j, path).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path, std::string("wrong type: ") + e.what());
  }
}

template <class T>
T get_or(const json& j, const std::string& path, T dflt) {
  return optional(j, path) ? get_as<T>(j, path) : dflt;
}

// Either [[re, im], ...] for k = 0..K (negative k by conjugation) or
// {"amplitude": a, "phase": theta} meaning a e^{i theta sgn k}.
CoeffSeq parse_alpha(const json& j, const std::string& path, int N) {
  CoeffSeq a(N, true);
  if (j.is_object()) {
    if (!j.contains("amplitude")) throw ConfigError(path + ".amplitude", "missing key");
    double amp = j["amplitude"].get<double>();
    double th = j.value("phase", 0.0);
    for (int n = -N; n <= N; ++n) a(n) = std::polar(amp, th * ((n > 0) - (n < 0)));
    return a;
  }
  if (!j.is_array()) throw ConfigError(path, "expected array or {amplitude, phase}");
  const int K = static_cast<int>(j.size()) - 1;
  if (K < N)
    throw ConfigError(path, "has " + std::to_string(K + 1) + " coefficients, need N+1 = " +
                                std::to_string(N + 1));
  for (int k = 0; k <= N; ++k) {
    const auto& e = j[k];
    cplx z;
    if (e.is_number())
      z = e.get<double>();
    else if (e.is_array() && e.size() == 2)
      z = cplx(e[0].get<double>(), e[1].get<double>());
    else
      throw ConfigError(path + "[" + std::to_string(k) + "]", "expected number or [re, im]");
    if (k == 0) z = z.real();
    a(k) = z;
    a(-k) = std::conj(z);
  }
  a(0) = a(0).real();
  return a;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("", std::string("malformed config: ") + e.what());
  }
  RunConfig c;
  c.N = get_as<int>(j, "model.N");
  c.M = get_or<int>(j, "model.M", 8 * c.N);
  c.g = get_as<double>(j, "model.g");
  c.eps0 = get_or<double>(j, "model.eps0", 0.1);
  c.coupling.alpha1 = parse_alpha(require(j, "coupling.alpha1"), "coupling.alpha1", c.N);
  c.coupling.alpha2 = parse_alpha(require(j, "coupling.alpha2"), "coupling.alpha2", c.N);
  c.coupling.c0 = get_as<double>(j, "coupling.c0");
  c.coupling.c1 = get_as<double>(j, "coupling.c1");
  c.coupling.c2 = get_as<double>(j, "coupling.c2");
  c.temps.T1 = get_as<double>(j, "temps.T1");
  c.temps.T2 = get_as<double>(j, "temps.T2");
  c.root_tol = get_or<double>(j, "tol.root", c.root_tol);
  c.fixpoint_tol = get_or<double>(j, "tol.fixpoint", c.fixpoint_tol);
  c.tail_tol = get_or<double>(j, "tol.tail", c.tail_tol);
  c.seed = get_or<std::uint64_t>(j, "rng.seed", c.seed);
  c.parallel_width = get_or<int>(j, "parallel.width", c.parallel_width);
  c.check();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const RunConfig& c) {
  auto alpha = [&](const CoeffSeq& a) {
    json arr = json::array();
    for (int k = 0; k <= c.N; ++k) arr.push_back({a(k).real(), a(k).imag()});
    return arr;
  };
  json j;
  j["model"] = {{"N", c.N}, {"M", c.M}, {"g", c.g}, {"eps0", c.eps0}};
  j["coupling"] = {{"alpha1", alpha(c.coupling.alpha1)},
                   {"alpha2", alpha(c.coupling.alpha2)},
                   {"c0", c.coupling.c0},
                   {"c1", c.coupling.c1},
                   {"c2", c.coupling.c2}};
  j["temps"] = {{"T1", c.temps.T1}, {"T2", c.temps.T2}};
  j["tol"] = {{"root", c.root_tol}, {"fixpoint", c.fixpoint_tol}, {"tail", c.tail_tol}};
  j["rng"] = {{"seed", c.seed}};
  j["parallel"] = {{"width", c.parallel_width}};
  return j.dump(2);
}

}  // namespace kgring
