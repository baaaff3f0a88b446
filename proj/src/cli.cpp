#include "kgring/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "kgring/diagrams.hpp"
#include "kgring/manifest.hpp"
#include "kgring/sde.hpp"
#include "kgring/validate.hpp"

namespace kgring {

using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Runs f, records its wall time under `stage`.
template <class F>
auto timed(RunDir& run, const std::string& stage, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  if constexpr (std::is_void_v<decltype(f())>) {
    f();
    run.time(stage, seconds_since(t0));
  } else {
    auto r = f();
    run.time(stage, seconds_since(t0));
    return r;
  }
}

CsvTable coupling_table(const CouplingReport& rep) {
  CsvTable t({"n", "bilinear", "hermitian", "margin_1", "margin_2", "margin_3"});
  for (auto& r : rep.rows)
    t.row({num(r.n), num(r.bilinear), num(r.hermitian), num(r.margin[0]), num(r.margin[1]),
           num(r.margin[2])});
  return t;
}

const char* inequality_name(int i) {
  switch (i) {
    case 1: return "c1 <= |a.a|";
    case 2: return "|a.a| <= c2 a*.a";
    default: return "a*.a <= c0";
  }
}

// Non-degeneracy of the coupling; prints the violations.
bool coupling_ok(const RunConfig& cfg, std::ostream& err, CouplingReport* keep = nullptr) {
  auto rep = validate_coupling(cfg.coupling, cfg.N);
  for (auto& v : rep.violations)
    err << "coupling violation at n=" << v.n << ", inequality " << v.inequality << " ("
        << inequality_name(v.inequality) << "): " << v.message << "\n";
  if (keep) *keep = rep;
  return rep.ok();
}

Spectrum spectrum_at(const RunConfig& cfg, const PotentialProfile& v) {
  return compute_spectrum(cfg.coupling, v, cfg.N, cfg.root_tol, cfg.parallel_width);
}

PotentialProfile zero_v(const RunConfig& cfg) { return PotentialProfile::zero(cfg.coupling, cfg.N, cfg.eps0); }

int cmd_spectrum(const RunConfig& cfg, RunDir& run, std::ostream& out) {
  const Spectrum sp = timed(run, "spectrum", [&] { return spectrum_at(cfg, zero_v(cfg)); });
  CsvTable t({"label", "kind", "n", "branch", "bath", "re_lambda", "im_lambda", "abs_pairing", "residual"});
  double worst = 0;
  for (auto& m : sp.modes) {
    const bool bath = m.label.kind == ModeKind::Bath;
    t.row({m.label.str(), bath ? "bath" : "osc", num(m.label.n), num(m.label.branch), num(m.label.bath),
           num(m.lambda.real()), num(m.lambda.imag()), num(std::abs(m.pairing)), num(m.residual)});
    worst = std::max(worst, m.residual);
  }
  run.write("spectrum.csv", t.str());
  out << sp.modes.size() << " modes, max residual " << worst << "\n";
  return kExitOk;
}

struct CovarianceOpts {
  bool fixpoint = false;
  std::vector<double> times;
};

int cmd_covariance(const RunConfig& cfg, const CovarianceOpts& o, RunDir& run, std::ostream& out) {
  PotentialProfile v = zero_v(cfg);
  if (o.fixpoint) v = timed(run, "fixpoint", [&] { return solve_fixed_point(cfg.g, cfg).v; });
  const Spectrum sp = timed(run, "spectrum", [&] { return spectrum_at(cfg, v); });
  const ModeCovariance mc = timed(run, "mode_covariance", [&] { return mode_covariance(sp, cfg.temps); });
  const CovarianceField field(sp, mc, cfg.M);
  const MatC grid = timed(run, "grid", [&] { return field.equal_time_grid(); });
  const int M = cfg.M;

  CsvTable g({"i", "j", "x", "y", "re", "im"});
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j)
      g.row({num(i), num(j), num(GridFunction::x(i, M)), num(GridFunction::x(j, M)), num(grid(i, j).real()),
             num(grid(i, j).imag())});
  run.write("covariance_grid.csv", g.str());

  CsvTable d({"i", "x", "c_xx"});
  for (int i = 0; i < M; ++i) d.row({num(i), num(GridFunction::x(i, M)), num(field.diag().values[i].real())});
  run.write("covariance_diag.csv", d.str());

  if (!o.times.empty()) {
    CsvTable s({"t", "i", "j", "x", "y", "re", "im"});
    timed(run, "time_slices", [&] {
      for (double t : o.times)
        for (int i = 0; i < M; ++i)
          for (int j = 0; j < M; ++j) {
            const cplx c = field(GridFunction::x(i, M), GridFunction::x(j, M), t);
            s.row({num(t), num(i), num(j), num(GridFunction::x(i, M)), num(GridFunction::x(j, M)),
                   num(c.real()), num(c.imag())});
          }
    });
    run.write("covariance_slices.csv", s.str());
  }
  out << "covariance on " << M << "x" << M << " grid, tail bound " << field.tail_bound() << "\n";
  return kExitOk;
}

json trace_json(const FixpointTrace& tr) {
  json j;
  j["converged"] = tr.converged;
  j["iterations"] = tr.iterates.size();
  j["observed_ratio"] = tr.observed_ratio();
  j["contraction_ratios"] = tr.contraction_ratios;
  j["iterates"] = json::array();
  for (auto& it : tr.iterates)
    j["iterates"].push_back({{"residual", it.residual}, {"omega", it.omega}, {"sup_norm", it.v.sup_norm}});
  return j;
}

int cmd_fixpoint(const RunConfig& cfg, int max_iter, RunDir& run, std::ostream& out) {
  FixpointResult fp;
  try {
    fp = timed(run, "fixpoint", [&] { return solve_fixed_point(cfg.g, cfg, max_iter); });
  } catch (const ConvergenceError& e) {
    json j = {{"converged", false}, {"error", e.what()}, {"trace", e.trace}};
    run.write("fixpoint_trace.json", j.dump(2) + "\n");
    throw;
  }
  const GridFunction vg = to_grid(fp.v.vhat, cfg.M);
  CsvTable t({"i", "x", "v"});
  for (int i = 0; i < cfg.M; ++i) t.row({num(i), num(GridFunction::x(i, cfg.M)), num(vg.values[i].real())});
  run.write("v_star.csv", t.str());
  run.write("fixpoint_trace.json", trace_json(fp.trace).dump(2) + "\n");
  out << "fixed point after " << fp.trace.iterates.size() << " iterates, sup|v*| = " << fp.v.sup_norm
      << ", observed ratio " << fp.trace.observed_ratio() << "\n";
  return kExitOk;
}

struct DiagramOpts {
  std::vector<std::string> ids{"g1_full", "g1_resonant", "g2_whale"};
  std::vector<std::string> probes{"0.3,1.7"};
  bool renormalized = false;
};

std::pair<double, double> parse_probe(const std::string& s) {
  const auto c = s.find(',');
  try {
    if (c == std::string::npos) throw std::invalid_argument(s);
    return {std::stod(s.substr(0, c)), std::stod(s.substr(c + 1))};
  } catch (const std::exception&) {
    throw ConfigError("--probe", "expected x,y but got '" + s + "'");
  }
}

int cmd_diagrams(const RunConfig& cfg, const DiagramOpts& o, RunDir& run, std::ostream& out) {
  PotentialProfile v = zero_v(cfg);
  if (o.renormalized) v = timed(run, "fixpoint", [&] { return solve_fixed_point(cfg.g, cfg).v; });
  const Spectrum sp = timed(run, "spectrum", [&] { return spectrum_at(cfg, v); });
  const ModeCovariance mc = mode_covariance(sp, cfg.temps);
  DiagramInputs in(sp, mc);
  if (o.renormalized) in.with_counterterm(v, cfg.g);

  using Eval = std::function<DiagramResult(double, double)>;
  std::vector<std::pair<std::string, Eval>> evals;
  for (auto& id : o.ids) {
    Eval e;
    if (id == "g1_full") e = [&](double x, double y) { return g1_full(x, y, cfg.g, in); };
    else if (id == "g1_resonant") e = [&](double x, double y) { return g1_resonant(x, y, cfg.g, in, true); };
    else if (id == "g1_resonant_unpaired")
      e = [&](double x, double y) { return g1_resonant(x, y, cfg.g, in, false); };
    else if (id == "g2_whale") e = [&](double x, double y) { return g2_whale(x, y, cfg.g, in, {}, cfg.parallel_width); };
    else if (id == "tadpole_third")
      e = [&](double x, double y) { return g2_tadpole_divergence(x, y, cfg.g, in, Tadpole::Third); };
    else if (id == "tadpole_fourth")
      e = [&](double x, double y) { return g2_tadpole_divergence(x, y, cfg.g, in, Tadpole::Fourth); };
    else if (id == "tadpole_difference")
      e = [&](double x, double y) { return g2_tadpole_divergence(x, y, cfg.g, in, Tadpole::Difference); };
    else throw ConfigError("--diagram", "unknown diagram '" + id + "'");
    evals.push_back({id, e});
  }

  CsvTable t({"diagram", "x", "y", "cutoff", "re", "im"});
  json res = json::array();
  for (auto& p : o.probes) {
    const auto [x, y] = parse_probe(p);
    for (auto& [id, e] : evals) {
      const DiagramResult r = timed(run, id, [&] { return e(x, y); });
      for (auto& [K, s] : r.cutoff_trace) t.row({id, num(x), num(y), num(K), num(s.real()), num(s.imag())});
      res.push_back({{"diagram", id}, {"x", x}, {"y", y}, {"re", r.value.real()}, {"im", r.value.imag()},
                     {"degree_fit", r.degree_fit}, {"divergent", r.divergent},
                     {"last_octave_variation", r.last_octave_variation}});
      out << id << " at (" << x << ", " << y << "): " << r.value << ", degree " << r.degree_fit
          << (r.divergent ? " (divergent)" : "") << "\n";
    }
  }
  run.write("diagram_traces.csv", t.str());
  run.write("diagrams.json", json{{"renormalized", o.renormalized}, {"results", res}}.dump(2) + "\n");
  return kExitOk;
}

struct SimulateOpts {
  std::string mode = "linear";
  double dt = 0.0;
  int sample_every = 1;
  long long samples = 10000;
  double burn_in = -1.0;
  int trajectories = 1;
  int batches = 50;
  std::vector<double> probes;
  std::vector<std::string> observables{"cov", "cross", "current"};
};

bool wants(const SimulateOpts& o, const std::string& k) {
  return std::find(o.observables.begin(), o.observables.end(), k) != o.observables.end();
}

int cmd_simulate(const RunConfig& cfg, const SimulateOpts& o, RunDir& run, std::ostream& out, std::ostream& err) {
  SimConfig sim;
  if (o.mode == "linear") sim.mode = SimMode::Linear;
  else if (o.mode == "nonlinear") sim.mode = SimMode::Nonlinear;
  else throw ConfigError("--mode", "expected linear or nonlinear");
  for (auto& k : o.observables)
    if (k != "cov" && k != "cross" && k != "current" && k != "decay")
      throw ConfigError("--observables", "unknown observable '" + k + "'");
  sim.dt = o.dt;
  sim.sample_every = o.sample_every;
  sim.samples = o.samples;
  sim.burn_in = o.burn_in;
  sim.trajectories = o.trajectories;
  sim.batches = o.batches;
  sim.probes = o.probes;
  sim.decay = wants(o, "decay");
  sim.width = cfg.parallel_width;

  SimOutput so = timed(run, "simulate", [&] { return run_stationary(cfg, sim); });
  const long long cnt = so.cov.count();

  if (wants(o, "cov") || wants(o, "cross")) {
    // the analytic column is the linear stationary law at v = 0
    std::optional<Spectrum> sp;
    std::optional<ModeCovariance> mc;
    std::optional<CovarianceField> field;
    if (sim.mode == SimMode::Linear) {
      sp = spectrum_at(cfg, zero_v(cfg));
      mc = mode_covariance(*sp, cfg.temps);
      field.emplace(*sp, *mc, cfg.M);
    }
    CsvTable t({"observable", "i", "j", "x", "y", "analytic", "mean", "se", "count"});
    for (std::size_t k = 0; k < so.pairs.size(); ++k) {
      const auto [i, j] = so.pairs[k];
      const double x = so.probes[i], y = so.probes[j];
      if (wants(o, "cov"))
        t.row({"phi_phi", num(i), num(j), num(x), num(y), field ? num((*field)(x, y).real()) : "",
               num(so.cov.mean(int(k))), num(so.cov.se(int(k))), num(cnt)});
      if (wants(o, "cross"))
        t.row({"phi_pi", num(i), num(j), num(x), num(y), "", num(so.cross.mean(int(k))),
               num(so.cross.se(int(k))), num(so.cross.count())});
    }
    run.write("covariance.csv", t.str());
  }
  if (wants(o, "current")) {
    CsvTable t({"observable", "mean", "se", "count"});
    t.row({"current", num(so.current.mean(0)), num(so.current.se(0)), num(so.current.count())});
    run.write("current.csv", t.str());
  }
  if (sim.decay) {
    CsvTable t({"label", "re_lambda", "im_lambda", "tau", "mean", "se", "count"});
    for (auto& d : so.decay_modes)
      t.row({d.label.str(), num(d.lambda.real()), num(d.lambda.imag()), num(d.tau), num(d.rate), num(d.se),
             num(so.decay.count())});
    run.write("decay.csv", t.str());
  }
  json info = {{"aborted_trajectories", so.aborted}, {"drift_flagged", so.flagged}, {"min_ess", so.min_ess()},
               {"samples", cnt}, {"probes", so.probes}};
  run.write("simulate.json", info.dump(2) + "\n");
  if (so.aborted) err << "warning: " << so.aborted << " trajectory(ies) blew up and were discarded\n";
  if (so.flagged) err << "warning: batch means drift beyond 5 sigma; burn-in may be too short\n";
  out << cnt << " samples, min ESS " << so.min_ess() << "\n";
  return kExitOk;
}

struct ValidateOpts {
  int n_max = 10000;
  double gamma = 0.9;
};

int cmd_validate(const RunConfig& cfg, const ValidateOpts& o, RunDir& run, std::ostream& out) {
  struct Named {
    std::string name;
    int N;
    LemmaReport rep;
  };
  std::vector<Named> reps;
  reps.push_back({"estimate_sums", cfg.N, timed(run, "estimate_sums", [&] { return check_estimate_sums(o.n_max, o.gamma); })});
  const PotentialProfile v0 = zero_v(cfg);
  const Spectrum sp = spectrum_at(cfg, v0);
  RunConfig dbl = cfg;
  dbl.N = 2 * cfg.N;
  dbl.coupling = cfg.coupling.band(dbl.N);
  const Spectrum sp2 = spectrum_at(dbl, PotentialProfile::zero(dbl.coupling, dbl.N, dbl.eps0));

  CsvTable t({"lemma", "N", "pass", "skipped", "worst_margin"});
  CsvTable drift({"lemma", "N", "N2", "drift", "pass"});
  auto pair_check = [&](const std::string& stage, auto&& f) {
    LemmaReport a = timed(run, stage, [&] { return f(sp); });
    LemmaReport b = timed(run, stage + "_2N", [&] { return f(sp2); });
    if (!a.skipped && !b.skipped) {
      const double d = constant_drift(a, b, fitted_constant_names(a.id));
      drift.row({a.id, num(cfg.N), num(dbl.N), num(d), d <= kFitAllowance ? "1" : "0"});
    }
    reps.push_back({a.id, cfg.N, std::move(a)});
    reps.push_back({reps.back().name + "_2N", dbl.N, std::move(b)});
  };
  pair_check("eigen_splitting", [](const Spectrum& s) { return check_eigen_splitting(s); });
  pair_check("eigenfunction_bounds", [&](const Spectrum& s) { return check_eigenfunction_bounds(s, o.gamma); });
  pair_check("pairing_bounds", [](const Spectrum& s) { return check_pairing_bounds(s); });
  // Lipschitz in v between 0 and the first-order fixed point
  const PotentialProfile vs = timed(run, "fixpoint", [&] { return solve_fixed_point(cfg.g, cfg).v; });
  reps.push_back({"v_lipschitz", cfg.N,
                  timed(run, "v_lipschitz", [&] { return check_v_lipschitz(cfg.coupling, v0, vs, cfg.N); })});

  bool ok = true;
  for (auto& [name, n, r] : reps) {
    t.row({name, num(n), r.pass ? "1" : "0", r.skipped ? "1" : "0", num(r.worst_margin)});
    run.write("lemma_" + name + ".json", report_to_json(r) + "\n");
    ok = ok && (r.pass || r.skipped);
    out << name << ": " << (r.skipped ? "skipped" : r.pass ? "pass" : "FAIL") << "\n";
  }
  for (auto& row : drift.rows()) {
    ok = ok && row[4] == "1";
    out << row[0] << " constant drift under N doubling: " << row[3] << (row[4] == "1" ? "" : " (FAIL)") << "\n";
  }
  run.write("validate.csv", t.str());
  run.write("constant_drift.csv", drift.str());
  return ok ? kExitOk : kExitValidation;
}

std::vector<double> csv_doubles(const std::string& s, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  try {
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  } catch (const std::exception&) {
    throw ConfigError(key, "expected comma-separated numbers but got '" + s + "'");
  }
  return out;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"kgring: stochastic Klein-Gordon ring with two heat baths"};
  app.require_subcommand(1);
  std::string config_path, out_dir;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config,-c", config_path, "run config (JSON)")->envname("KGRING_CONFIG");
    sub->add_option("--out,-o", out_dir, "output directory")->required();
  };

  auto* spectrum = app.add_subcommand("spectrum", "eigenvalues of the truncated drift operator");
  add_common(spectrum);

  CovarianceOpts cov;
  std::string times;
  auto* covariance = app.add_subcommand("covariance", "stationary covariance on the grid");
  add_common(covariance);
  covariance->add_flag("--fixpoint", cov.fixpoint, "use the renormalized potential v*");
  covariance->add_option("--times", times, "comma-separated t values for C(x, y, t) slices");

  int max_iter = 50;
  auto* fixpoint = app.add_subcommand("fixpoint", "renormalization fixed point at model.g");
  add_common(fixpoint);
  fixpoint->add_option("--max-iter", max_iter, "iteration cap")->check(CLI::PositiveNumber);

  DiagramOpts dg;
  auto* diagrams = app.add_subcommand("diagrams", "perturbative diagrams with cutoff traces");
  add_common(diagrams);
  diagrams->add_option("--diagram", dg.ids,
                       "g1_full, g1_resonant, g1_resonant_unpaired, g2_whale, tadpole_third, tadpole_fourth, "
                       "tadpole_difference");
  diagrams->add_option("--probe", dg.probes, "probe point x,y (repeatable)");
  diagrams->add_flag("--renormalized", dg.renormalized, "include v* and its counterterm");

  SimulateOpts so;
  std::string probes;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo of the stationary state");
  add_common(simulate);
  simulate->add_option("--mode", so.mode, "linear or nonlinear");
  simulate->add_option("--dt", so.dt, "linear: sample interval; nonlinear: step (0 = default)");
  simulate->add_option("--sample-every", so.sample_every, "nonlinear steps per sample")->check(CLI::PositiveNumber);
  simulate->add_option("--samples", so.samples, "samples per trajectory")->check(CLI::PositiveNumber);
  simulate->add_option("--burn-in", so.burn_in, "burn-in time (< 0 = 20 slowest decay times)");
  simulate->add_option("--trajectories", so.trajectories)->check(CLI::PositiveNumber);
  simulate->add_option("--batches", so.batches)->check(CLI::Range(2, 100000));
  simulate->add_option("--probes", probes, "comma-separated probe points x");
  simulate->add_option("--observables", so.observables, "cov, cross, current, decay")->delimiter(',');

  ValidateOpts vo;
  auto* validate = app.add_subcommand("validate", "coupling and estimate checks");
  add_common(validate);
  validate->add_option("--n-max", vo.n_max, "largest n for the estimate sums")->check(CLI::Range(100, 10000000));
  validate->add_option("--gamma", vo.gamma, "Hoelder/estimate exponent in (0, 1)");

  std::vector<std::string> run_dirs;
  auto* report = app.add_subcommand("report", "merge run directories into a summary");
  report->add_option("runs", run_dirs, "run directories")->required();
  report->add_option("--out,-o", out_dir, "output directory")->required();

  std::vector<std::string> argv{"kgring"};
  argv.insert(argv.end(), args.begin(), args.end());
  std::vector<const char*> cargs;
  for (auto& a : argv) cargs.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitError;
  }

  try {
    if (report->parsed()) {
      std::vector<std::filesystem::path> dirs(run_dirs.begin(), run_dirs.end());
      ReportResult r = merge_runs(dirs);
      std::filesystem::create_directories(out_dir);
      for (auto& [name, content] : r.files) std::ofstream(std::filesystem::path(out_dir) / name, std::ios::binary) << content;
      std::ofstream(std::filesystem::path(out_dir) / "summary.txt", std::ios::binary) << r.summary;
      out << r.summary;
      return kExitOk;
    }

    if (config_path.empty()) throw ConfigError("--config", "no config given (flag or KGRING_CONFIG)");
    const RunConfig cfg = load_config(config_path);
    CLI::App* sub = app.get_subcommands().front();
    RunDir run(out_dir, sub->get_name(), cfg);

    CouplingReport crep;
    const bool cok = coupling_ok(cfg, err, &crep);
    if (sub == validate) run.write("coupling.csv", coupling_table(crep).str());
    if (!cok) {
      run.finish(kExitValidation);
      return kExitValidation;
    }

    int code = kExitOk;
    try {
      if (sub == spectrum) {
        code = cmd_spectrum(cfg, run, out);
      } else if (sub == covariance) {
        if (!times.empty()) cov.times = csv_doubles(times, "--times");
        run.options(json{{"fixpoint", cov.fixpoint}, {"times", cov.times}}.dump());
        code = cmd_covariance(cfg, cov, run, out);
      } else if (sub == fixpoint) {
        run.options(json{{"max_iter", max_iter}}.dump());
        code = cmd_fixpoint(cfg, max_iter, run, out);
      } else if (sub == diagrams) {
        run.options(json{{"diagram", dg.ids}, {"probe", dg.probes}, {"renormalized", dg.renormalized}}.dump());
        code = cmd_diagrams(cfg, dg, run, out);
      } else if (sub == simulate) {
        if (!probes.empty()) so.probes = csv_doubles(probes, "--probes");
        run.options(json{{"mode", so.mode}, {"dt", so.dt}, {"sample_every", so.sample_every},
                         {"samples", so.samples}, {"burn_in", so.burn_in}, {"trajectories", so.trajectories},
                         {"batches", so.batches}, {"probes", so.probes}, {"observables", so.observables}}
                        .dump());
        code = cmd_simulate(cfg, so, run, out, err);
      } else if (sub == validate) {
        run.options(json{{"n_max", vo.n_max}, {"gamma", vo.gamma}}.dump());
        code = cmd_validate(cfg, vo, run, out);
      }
    } catch (...) {
      run.finish(kExitError);
      throw;
    }
    run.finish(code);
    return code;
  } catch (const ConfigError& e) {
    err << "config error" << (e.key.empty() ? "" : " at " + e.key) << ": " << e.what() << "\n";
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << "\n";
    for (auto& line : e.trace) err << "  " << line << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kExitError;
}

}  // namespace kgring
