// Command-line front end: one subcommand per pipeline stage, a flat
// key = value config file with flag overrides, and a manifest next to every
// artifact so any run can be reproduced bit-for-bit with `rtip rerun`.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rtip/critical.hpp"
#include "rtip/io.hpp"
#include "rtip/pullback.hpp"
#include "rtip/spectrum.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace rtip;

namespace {

constexpr const char* kConfigKeyHelp =
    "Config file keys (flat `key = value`, '#' comments; flags override):\n"
    "  model:          beta lambda_r L a r Z tol_bvp tol_ode tol_newton\n"
    "  spectrum:       lambda_hi n_scan\n"
    "  pullback:       t_end snapshots\n"
    "  critical-rate:  r_lo r_hi tol_r\n"
    "  diagram:        d_grid r_max tol_r workers\n"
    "  heteroclinic:   r_init seed_r_lo seed_r_hi seed_tol_r\n"
    "  transversality: heteroclinic keys plus window dr0\n"
    "Environment: RTIP_OUTPUT_DIR sets the default --output-dir.\n"
    "Exit codes: 0 success, 2 usage or config error, 3 numerical failure.";

const char* classification_name(Classification c) {
  switch (c) {
    case Classification::tracking: return "tracking";
    case Classification::extinct: return "extinct";
    default: return "undetermined";
  }
}

// Flags are collected as raw strings and overlaid onto the config file, so
// config parsing and validation live in one place (KvConfig).
struct SubContext {
  CLI::App* sub = nullptr;
  std::string config_file;
  std::string output_dir = ".";
  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option*> flag_opts;

  void add_key(const std::string& key, const std::string& flag,
               const std::string& desc) {
    flag_opts[key] = sub->add_option(flag, flag_values[key], desc);
  }

  KvConfig effective() const {
    KvConfig cfg;
    if (!config_file.empty()) cfg = KvConfig::from_file(config_file);
    for (const auto& [key, opt] : flag_opts)
      if (opt->count() > 0) cfg.set(key, flag_values.at(key));
    return cfg;
  }
};

SubContext* make_sub(CLI::App& app, std::vector<std::unique_ptr<SubContext>>& pool,
                     const std::string& name, const std::string& desc) {
  auto ctx = std::make_unique<SubContext>();
  ctx->sub = app.add_subcommand(name, desc);
  ctx->sub->add_option("--config", ctx->config_file,
                       "flat key = value config file");
  ctx->sub->add_option("--output-dir", ctx->output_dir, "artifact directory")
      ->envname("RTIP_OUTPUT_DIR");
  ctx->add_key("beta", "--beta", "linear decay rate");
  ctx->add_key("lambda_r", "--lambda-r", "growth coefficient");
  ctx->add_key("L", "--L", "habitat patch width");
  ctx->add_key("a", "--a", "half of the total shift distance");
  ctx->add_key("r", "--r", "shift rate");
  ctx->add_key("Z", "--Z", "half-width of the spatial domain");
  ctx->add_key("tol_bvp", "--tol-bvp", "collocation residual target");
  ctx->add_key("tol_ode", "--tol-ode", "relative ODE tolerance");
  ctx->add_key("tol_newton", "--tol-newton", "Newton residual target");
  pool.push_back(std::move(ctx));
  return pool.back().get();
}

void set_model_keys(KvConfig& cfg, const ModelParams& p) {
  cfg.set("beta", p.beta);
  cfg.set("lambda_r", p.lambda_r);
  cfg.set("L", p.L);
  cfg.set("a", p.a);
  cfg.set("r", p.r);
  cfg.set("Z", p.Z);
  cfg.set("tol_bvp", p.tol_bvp);
  cfg.set("tol_ode", p.tol_ode);
  cfg.set("tol_newton", p.tol_newton);
}

void write_json(const fs::path& path, const ordered_json& j) {
  atomic_write(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Subcommand bodies.  Each resolves its option keys into `cfg` (so the
// manifest records the exact effective configuration), writes its artifacts,
// and finishes with the manifest.

int cmd_pulse(KvConfig cfg, const ModelParams& p, const fs::path& dir) {
  const PulseProfile stable = compute_pulse(PulseKind::stable, p);
  const PulseProfile unstable = compute_pulse(PulseKind::unstable, p);

  auto table = [](const PulseProfile& pulse) {
    std::vector<std::vector<double>> rows;
    rows.reserve(pulse.z.size());
    for (int i = 0; i < pulse.z.size(); ++i)
      rows.push_back({pulse.z[i], pulse.u[i], pulse.v[i]});
    return rows;
  };
  write_csv(dir / "pulse_stable.csv", {"z", "u", "v"}, table(stable));
  write_csv(dir / "pulse_unstable.csv", {"z", "u", "v"}, table(unstable));

  const PointwiseOrder order = pointwise_order(stable, unstable);
  ordered_json j;
  j["max_u_stable"] = stable.u.maxCoeff();
  j["max_u_unstable"] = unstable.u.maxCoeff();
  j["xi_stable"] = stable.xi;
  j["xi_unstable"] = unstable.xi;
  j["order"] = {{"verdict", order.verdict},
                {"min_gap", order.min_gap},
                {"argmin_z", order.argmin_z},
                {"interior_min_gap", order.interior_min_gap}};
  write_json(dir / "pulse.json", j);

  write_manifest(dir, "pulse", cfg,
                 {"pulse_stable.csv", "pulse_unstable.csv", "pulse.json"});
  std::printf("max(u2*) = %.6f   max(u1*) = %.6f   ordered: %s\n",
              stable.u.maxCoeff(), unstable.u.maxCoeff(),
              order.verdict ? "yes" : "no");
  return 0;
}

int cmd_spectrum(KvConfig cfg, const ModelParams& p, const fs::path& dir) {
  const double lambda_hi = cfg.get_double("lambda_hi", 0.5);
  const int n_scan = cfg.get_int("n_scan", 400);
  cfg.set("lambda_hi", lambda_hi);
  cfg.set("n_scan", n_scan);

  const PulseProfile stable = compute_pulse(PulseKind::stable, p);
  const PulseProfile unstable = compute_pulse(PulseKind::unstable, p);
  const PulseProfile trivial = trivial_profile(stable.z, p);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const SpectrumReport edge = find_eigenvalues(unstable, nan, lambda_hi, n_scan);
  const SpectrumReport base = find_eigenvalues(stable, nan, lambda_hi, n_scan);
  const SpectrumReport ext = find_eigenvalues(trivial, nan, lambda_hi, n_scan);

  std::vector<std::vector<double>> rows;
  auto add_rows = [&rows](double id, const SpectrumReport& rep) {
    for (std::size_t i = 0; i < rep.eigenvalues.size(); ++i)
      rows.push_back({id, rep.eigenvalues[i], double(rep.indices[i])});
  };
  add_rows(0, ext);
  add_rows(1, base);
  add_rows(2, edge);
  write_csv(dir / "spectrum.csv", {"pulse_id", "eigenvalue", "osc_index"},
            rows);

  auto report = [](const SpectrumReport& rep) {
    return ordered_json{{"eigenvalues", rep.eigenvalues},
                        {"osc_indices", rep.indices},
                        {"h2", rep.h2},
                        {"h3", rep.h3},
                        {"h4", rep.h4}};
  };
  ordered_json j;
  j["ess_boundary"] = edge.ess_boundary;
  j["extinction"] = report(ext);
  j["base"] = report(base);
  j["edge"] = report(edge);
  write_json(dir / "spectrum.json", j);

  write_manifest(dir, "spectrum", cfg, {"spectrum.csv", "spectrum.json"});
  std::printf("edge eigenvalues right of %.4e:", edge.ess_boundary);
  for (double ev : edge.eigenvalues) std::printf(" %.6e", ev);
  std::printf("   H3: %s  H4: %s  H2: %s\n", edge.h3 ? "pass" : "fail",
              base.h4 ? "pass" : "fail", ext.h2 ? "pass" : "fail");
  return 0;
}

int cmd_pullback(KvConfig cfg, const ModelParams& p, const fs::path& dir) {
  const double t_end = cfg.get_double("t_end", 1000.0);
  const std::vector<double> snapshots = cfg.get_list("snapshots");
  cfg.set("t_end", t_end);
  if (!snapshots.empty()) cfg.set_list("snapshots", snapshots);

  const PullbackEngine engine(p);
  const PullbackRun run = engine.run(p, t_end);
  const SemidiscreteSystem& sys = engine.system();
  const int N = sys.N();

  std::vector<std::vector<double>> rows;
  rows.reserve(run.trajectory.size());
  for (int i = 0; i < run.trajectory.size(); ++i) {
    const VectorXd& y = run.trajectory.state(i);
    rows.push_back({run.trajectory.times()[i], y[N], sys.norm(y.head(N)),
                    sys.norm(y.head(N) - sys.V_s)});
  }
  write_csv(dir / "pullback.csv", {"t", "gamma", "norm", "dist_stable"}, rows);

  std::vector<std::string> outputs = {"pullback.csv", "pullback.json"};
  if (!snapshots.empty()) {
    std::vector<std::string> header = {"z"};
    char buf[40];
    for (double t : snapshots) {
      std::snprintf(buf, sizeof buf, "t_%.17g", t);
      header.push_back(buf);
    }
    std::vector<VectorXd> states(snapshots.size(), VectorXd(sys.dim()));
    for (std::size_t k = 0; k < snapshots.size(); ++k)
      run.trajectory.eval(snapshots[k], states[k]);
    std::vector<std::vector<double>> snap;
    snap.reserve(N);
    for (int i = 0; i < N; ++i) {
      std::vector<double> row = {sys.mesh[i]};
      for (const auto& y : states) row.push_back(y[i]);
      snap.push_back(std::move(row));
    }
    write_csv(dir / "snapshots.csv", header, snap);
    outputs.insert(outputs.begin() + 1, "snapshots.csv");
  }

  ordered_json j;
  j["classification"] = classification_name(run.classification);
  j["T_L"] = run.T_L;
  j["t_end"] = run.t_end;
  j["delta1"] = run.delta1;
  j["delta2"] = run.delta2;
  j["diagnostics"] = {{"dist_end", run.diagnostics.dist_end},
                      {"norm_end", run.diagnostics.norm_end},
                      {"sup_error", run.diagnostics.sup_error},
                      {"sup_error_time", run.diagnostics.sup_error_time}};
  write_json(dir / "pullback.json", j);

  write_manifest(dir, "pullback", cfg, outputs);
  std::printf("r = %.6g -> %s (dist_end = %.3e, norm_end = %.3e)\n", p.r,
              classification_name(run.classification),
              run.diagnostics.dist_end, run.diagnostics.norm_end);
  return 0;
}

ordered_json history_json(const CriticalRateResult& res) {
  ordered_json h = ordered_json::array();
  for (const auto& [r, c] : res.history)
    h.push_back({{"r", r}, {"classification", classification_name(c)}});
  return h;
}

int cmd_critical_rate(KvConfig cfg, const ModelParams& p, const fs::path& dir) {
  const double r_lo = cfg.get_double("r_lo", 0.9);
  const double r_hi = cfg.get_double("r_hi", 1.1);
  const double tol_r = cfg.get_double("tol_r", 1e-4);
  cfg.set("r_lo", r_lo);
  cfg.set("r_hi", r_hi);
  cfg.set("tol_r", tol_r);

  const CriticalSolver solver(p);
  const CriticalRateResult res = solver.bisect_rc(p, r_lo, r_hi, tol_r);

  std::vector<std::vector<double>> rows;
  for (const auto& [r, c] : res.history)
    rows.push_back({r, double(int(c))});
  write_csv(dir / "critical_history.csv", {"r", "classification"}, rows);

  ordered_json j;
  j["d"] = res.d;
  j["r_lo"] = res.r_lo;
  j["r_hi"] = res.r_hi;
  j["r_c"] = res.r_c;
  j["method"] = "bisection";
  j["history"] = history_json(res);
  write_json(dir / "critical_rate.json", j);

  write_manifest(dir, "critical-rate", cfg,
                 {"critical_history.csv", "critical_rate.json"});
  std::printf("r_c = %.6f  (bracket [%.6f, %.6f], %zu runs)\n", res.r_c,
              res.r_lo, res.r_hi, res.history.size());
  return 0;
}

int cmd_diagram(KvConfig cfg, const ModelParams& p, const fs::path& dir) {
  std::vector<double> d_grid = cfg.get_list("d_grid");
  if (d_grid.empty()) d_grid = {28.0, 32.0, 36.0, 40.0, 50.0, 60.0};
  const double r_max = cfg.get_double("r_max", 50.0);
  const double tol_r = cfg.get_double("tol_r", 1e-3);
  int workers = cfg.get_int("workers", 0);
  if (workers <= 0)
    workers = int(std::max(1u, std::thread::hardware_concurrency()));
  cfg.set_list("d_grid", d_grid);
  cfg.set("r_max", r_max);
  cfg.set("tol_r", tol_r);
  cfg.set("workers", workers);

  const CriticalSolver solver(p);
  const TippingDiagram diag =
      solver.sweep_diagram(d_grid, r_max, tol_r, workers);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> rows;
  ordered_json entries = ordered_json::array();
  for (const DiagramEntry& e : diag.entries) {
    const bool ok = e.error.empty();
    rows.push_back({e.d, double(e.tipping), e.tipping ? e.result.r_c : nan,
                    e.tipping ? e.result.r_lo : nan,
                    e.tipping ? e.result.r_hi : nan});
    ordered_json je;
    je["d"] = e.d;
    je["tipping"] = e.tipping;
    if (e.tipping) {
      je["r_c"] = e.result.r_c;
      je["r_lo"] = e.result.r_lo;
      je["r_hi"] = e.result.r_hi;
      je["runs"] = e.result.history.size();
    }
    if (!ok) je["error"] = e.error;
    entries.push_back(std::move(je));
    if (ok)
      std::printf("d = %5.2f -> %s\n", e.d,
                  e.tipping ? ("r_c = " + std::to_string(e.result.r_c)).c_str()
                            : "no tipping up to r_max");
    else
      std::printf("d = %5.2f -> error: %s\n", e.d, e.error.c_str());
  }
  write_csv(dir / "diagram.csv", {"d", "tipping", "r_c", "r_lo", "r_hi"}, rows);

  ordered_json j;
  j["r_max"] = diag.r_max;
  j["tol_r"] = diag.tol_r;
  j["entries"] = std::move(entries);
  write_json(dir / "diagram.json", j);

  write_manifest(dir, "diagram", cfg, {"diagram.csv", "diagram.json"});
  return 0;
}

// Shared by heteroclinic and transversality: resolve r_init (seeding it from
// a coarse bisection when absent) and refine the connection.
HeteroclinicSolution resolve_connection(KvConfig& cfg, const ModelParams& p,
                                        const CriticalSolver& solver) {
  double r_init;
  if (cfg.has("r_init")) {
    r_init = cfg.get_double("r_init", 0.0);
  } else {
    const double lo = cfg.get_double("seed_r_lo", 0.9);
    const double hi = cfg.get_double("seed_r_hi", 1.1);
    const double tol = cfg.get_double("seed_tol_r", 1e-3);
    std::printf("seeding r_init from bisection on [%g, %g]...\n", lo, hi);
    r_init = solver.bisect_rc(p, lo, hi, tol).r_c;
  }
  cfg.set("r_init", r_init);
  return solver.refine_heteroclinic(p, r_init);
}

ordered_json connection_json(const HeteroclinicSolution& het) {
  ordered_json j;
  j["r_c"] = het.r_c;
  j["T"] = het.T;
  j["t_match"] = het.t_match;
  j["miss"] = het.miss;
  j["miss_slope"] = het.miss_slope;
  j["residual_minus"] = het.residual_minus;
  j["residual_plus"] = het.residual_plus;
  j["gamma0_residual"] = het.gamma0_residual;
  return j;
}

int cmd_heteroclinic(KvConfig cfg, const ModelParams& p, const fs::path& dir) {
  const CriticalSolver solver(p);
  const HeteroclinicSolution het = resolve_connection(cfg, p, solver);
  const SemidiscreteSystem& sys = solver.engine().system();
  const int N = sys.N();

  std::vector<std::vector<double>> rows;
  rows.reserve(het.trajectory.size());
  for (int i = 0; i < het.trajectory.size(); ++i) {
    const VectorXd& y = het.trajectory.state(i);
    rows.push_back({het.trajectory.times()[i], y[N], sys.norm(y.head(N)),
                    sys.norm(y.head(N) - sys.V_u)});
  }
  write_csv(dir / "connection.csv", {"t", "gamma", "norm", "dist_edge"}, rows);
  write_json(dir / "heteroclinic.json", connection_json(het));

  write_manifest(dir, "heteroclinic", cfg,
                 {"connection.csv", "heteroclinic.json"});
  std::printf(
      "r_c = %.7f  T = %.1f  |miss| = %.2e  residuals %.2e / %.2e\n",
      het.r_c, het.T, std::abs(het.miss), het.residual_minus,
      het.residual_plus);
  return 0;
}

int cmd_transversality(KvConfig cfg, const ModelParams& p,
                       const fs::path& dir) {
  const double window = cfg.get_double("window", 0.0);
  const double dr0 = cfg.get_double("dr0", 1.0);
  cfg.set("window", window);
  cfg.set("dr0", dr0);

  const CriticalSolver solver(p);
  const HeteroclinicSolution het = resolve_connection(cfg, p, solver);
  const double tv = solver.transversality(het, p, window, dr0);
  const double window_used =
      window == 0.0 ? std::min(CriticalSolver::kMissTime, het.T) : window;

  ordered_json j;
  j["value"] = tv;
  j["window"] = window_used;
  j["dr0"] = dr0;
  j["degenerate"] = std::abs(tv) < 1e-10;
  j["sign_matches_miss_slope"] = tv * het.miss_slope > 0.0;
  j["connection"] = connection_json(het);
  write_json(dir / "transversality.json", j);

  write_manifest(dir, "transversality", cfg, {"transversality.json"});
  std::printf("transversality = %+.6e at window %.1f (miss slope %+.3e)\n", tv,
              window_used, het.miss_slope);
  return 0;
}

int cmd_verify(KvConfig cfg, const ModelParams& p, const fs::path& dir) {
  const PulseProfile stable = compute_pulse(PulseKind::stable, p);
  const PulseProfile unstable = compute_pulse(PulseKind::unstable, p);
  const PulseProfile trivial = trivial_profile(stable.z, p);

  // H1: ordered positive steady states.
  const PointwiseOrder order = pointwise_order(stable, unstable);
  const bool h1 = order.verdict && unstable.u.minCoeff() > -1e-10;

  // H2-H4: point spectra of the three linearizations.
  const SpectrumReport ext = find_eigenvalues(trivial);
  const SpectrumReport base = find_eigenvalues(stable);
  const SpectrumReport edge = find_eigenvalues(unstable);

  // H5: shift velocity vanishes exactly at +-a, is positive inside, and has
  // nonzero slope +-2 at the ends (finite-difference check).
  const double ga = shift_velocity(p.a, p.a);
  const double gma = shift_velocity(-p.a, p.a);
  double g_min = std::numeric_limits<double>::infinity();
  for (int i = 1; i < 2000; ++i)
    g_min = std::min(g_min, shift_velocity(-p.a + 2 * p.a * i / 2000.0, p.a));
  const double h = 1e-7;
  const double dg_minus = (shift_velocity(-p.a + h, p.a) - gma) / h;
  const double dg_plus = (ga - shift_velocity(p.a - h, p.a)) / h;
  const bool h5 = ga == 0.0 && gma == 0.0 && g_min > 0.0 &&
                  std::abs(dg_minus - 2.0) < 1e-5 &&
                  std::abs(dg_plus + 2.0) < 1e-5;

  struct Line {
    const char* name;
    bool pass;
    std::string detail;
  };
  char buf[160];
  std::snprintf(buf, sizeof buf, "min gap %.3e", order.min_gap);
  const std::vector<Line> lines = {
      {"H1 ordered positive steady states", h1, buf},
      {"H2 extinction spectrally stable", ext.h2,
       std::to_string(ext.eigenvalues.size()) + " eigenvalues right of -beta^2"},
      {"H3 edge has exactly one unstable mode", edge.h3,
       std::to_string(edge.eigenvalues.size()) + " eigenvalues, top " +
           (edge.eigenvalues.empty()
                ? std::string("none")
                : std::to_string(edge.eigenvalues.front()))},
      {"H4 base spectrally stable", base.h4,
       std::to_string(base.eigenvalues.size()) + " eigenvalues right of -beta^2"},
      {"H5 shift velocity admissible", h5, "g(+-a) = 0, g > 0 inside"},
  };
  bool all = true;
  ordered_json checks = ordered_json::array();
  for (const Line& l : lines) {
    all = all && l.pass;
    std::printf("[%s] %s (%s)\n", l.pass ? "PASS" : "FAIL", l.name,
                l.detail.c_str());
    checks.push_back(
        {{"name", l.name}, {"pass", l.pass}, {"detail", l.detail}});
  }

  ordered_json j;
  j["checks"] = std::move(checks);
  j["h5_details"] = {{"g_at_a", ga},
                     {"g_at_minus_a", gma},
                     {"interior_min", g_min},
                     {"slope_at_minus_a", dg_minus},
                     {"slope_at_a", dg_plus}};
  j["all_pass"] = all;
  write_json(dir / "verify.json", j);

  write_manifest(dir, "verify", cfg, {"verify.json"});
  std::printf("verdict: %s\n", all ? "all hypotheses hold" : "FAILURES above");
  return all ? 0 : 3;
}

int dispatch(const std::string& name, KvConfig cfg, const fs::path& dir);

int cmd_rerun(const std::string& manifest_path, const fs::path& dir) {
  const Manifest m = read_manifest(manifest_path);
  std::printf("rerunning '%s' from %s\n", m.subcommand.c_str(),
              manifest_path.c_str());
  return dispatch(m.subcommand, m.config, dir);
}

const std::map<std::string, std::vector<std::string>>& extra_keys() {
  static const std::map<std::string, std::vector<std::string>> keys = {
      {"pulse", {}},
      {"spectrum", {"lambda_hi", "n_scan"}},
      {"pullback", {"t_end", "snapshots"}},
      {"critical-rate", {"r_lo", "r_hi", "tol_r"}},
      {"diagram", {"d_grid", "r_max", "tol_r", "workers"}},
      {"heteroclinic", {"r_init", "seed_r_lo", "seed_r_hi", "seed_tol_r"}},
      {"transversality",
       {"r_init", "seed_r_lo", "seed_r_hi", "seed_tol_r", "window", "dr0"}},
      {"verify", {}},
  };
  return keys;
}

int dispatch(const std::string& name, KvConfig cfg, const fs::path& dir) {
  const auto it = extra_keys().find(name);
  if (it == extra_keys().end())
    throw ConfigError("unknown subcommand in manifest: " + name);
  cfg.expect_known(it->second);
  ModelParams p;
  cfg.apply_model(p);
  set_model_keys(cfg, p);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output dir: " + dir.string());

  if (name == "pulse") return cmd_pulse(std::move(cfg), p, dir);
  if (name == "spectrum") return cmd_spectrum(std::move(cfg), p, dir);
  if (name == "pullback") return cmd_pullback(std::move(cfg), p, dir);
  if (name == "critical-rate") return cmd_critical_rate(std::move(cfg), p, dir);
  if (name == "diagram") return cmd_diagram(std::move(cfg), p, dir);
  if (name == "heteroclinic") return cmd_heteroclinic(std::move(cfg), p, dir);
  if (name == "transversality")
    return cmd_transversality(std::move(cfg), p, dir);
  return cmd_verify(std::move(cfg), p, dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Critical rates of habitat shift in a bistable "
               "reaction-diffusion model"};
  app.footer(kConfigKeyHelp);
  app.require_subcommand(1);

  std::vector<std::unique_ptr<SubContext>> subs;
  make_sub(app, subs, "pulse", "steady pulse profiles and their ordering");

  SubContext* spectrum = make_sub(
      app, subs, "spectrum",
      "point spectra of the three steady states with H2-H4 verdicts");
  spectrum->add_key("lambda_hi", "--lambda-hi", "upper end of the scan window");
  spectrum->add_key("n_scan", "--n-scan", "scan grid size");

  SubContext* pullback = make_sub(
      app, subs, "pullback",
      "single pullback run at the given rate, with classification");
  pullback->add_key("t_end", "--t-end", "integration horizon");
  pullback->add_key("snapshots", "--snapshots",
                    "comma-separated profile snapshot times");

  SubContext* crit = make_sub(app, subs, "critical-rate",
                              "bisect the tracking/extinction boundary in r");
  crit->add_key("r_lo", "--r-lo", "tracking end of the bracket");
  crit->add_key("r_hi", "--r-hi", "extinction end of the bracket");
  crit->add_key("tol_r", "--tol-r", "bracket width target");

  SubContext* diagram = make_sub(
      app, subs, "diagram", "critical rate across a grid of shift distances d");
  diagram->add_key("d_grid", "--d-grid", "comma-separated shift distances");
  diagram->add_key("r_max", "--r-max", "largest probed rate");
  diagram->add_key("tol_r", "--tol-r", "bracket width target");
  diagram->add_key("workers", "--workers",
                   "concurrent displacement workers (default: cores)");

  auto add_seed_keys = [](SubContext* ctx) {
    ctx->add_key("r_init", "--r-init",
                 "starting rate (default: seed from a coarse bisection)");
    ctx->add_key("seed_r_lo", "--seed-r-lo", "seeding bracket, tracking end");
    ctx->add_key("seed_r_hi", "--seed-r-hi", "seeding bracket, extinction end");
    ctx->add_key("seed_tol_r", "--seed-tol-r", "seeding bracket width");
  };
  SubContext* het = make_sub(app, subs, "heteroclinic",
                             "refine the connecting orbit at the critical rate");
  add_seed_keys(het);

  SubContext* tv = make_sub(
      app, subs, "transversality",
      "transversal-crossing certificate along the connection");
  add_seed_keys(tv);
  tv->add_key("window", "--window",
              "measurement time (default: the matching epoch)");
  tv->add_key("dr0", "--dr0", "parameter perturbation scale");

  make_sub(app, subs, "verify", "run the H1-H5 hypothesis checks end-to-end");

  CLI::App* rerun = app.add_subcommand(
      "rerun", "re-execute a run from its manifest, bit-for-bit");
  std::string manifest_path;
  std::string rerun_dir = ".";
  rerun->add_option("manifest", manifest_path, "path to manifest.json")
      ->required();
  rerun->add_option("--output-dir", rerun_dir, "artifact directory")
      ->envname("RTIP_OUTPUT_DIR");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (rerun->parsed()) return cmd_rerun(manifest_path, rerun_dir);
    for (const auto& ctx : subs) {
      if (!ctx->sub->parsed()) continue;
      KvConfig cfg;
      try {
        cfg = ctx->effective();
      } catch (const ConfigError& e) {
        std::fprintf(stderr, "rtip: %s\n", e.what());
        return 2;
      }
      try {
        return dispatch(ctx->sub->get_name(), std::move(cfg), ctx->output_dir);
      } catch (const ConfigError& e) {
        std::fprintf(stderr, "rtip: %s\n", e.what());
        return 2;
      } catch (const InvalidParameter& e) {
        std::fprintf(stderr, "rtip: invalid configuration: %s\n", e.what());
        return 2;
      }
    }
    // rerun dispatch errors fall through to the handlers below
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "rtip: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "rtip: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "rtip: %s\n", e.what());
    return 3;
  }
  return 2;
}
