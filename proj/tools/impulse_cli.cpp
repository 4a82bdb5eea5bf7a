// impulse_cli: solve, simulate, verify, regions, export.
//
// Exit codes: 0 pass, 1 verification failure, 2 usage/config error,
// 3 numerical failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "impulse/error.hpp"
#include "impulse/io.hpp"
#include "impulse/montecarlo.hpp"
#include "impulse/parallel.hpp"
#include "impulse/qvi_solver.hpp"
#include "impulse/strategy.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace impulse;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;
constexpr double kInfinity = std::numeric_limits<double>::infinity();

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoConvergence:
    case ErrorCode::GridEscape:
    case ErrorCode::StateOutOfGrid:
      return kExitNumerical;
    default:
      return kExitUsage;
  }
}

void emit_error_record(std::string_view code, const std::string& message, int exit_code) {
  json record;
  record["error"] = code;
  record["message"] = message;
  record["exit_code"] = exit_code;
  std::cerr << record.dump() << "\n";
}

struct Overrides {
  std::optional<double> tol;
  std::optional<double> dt;
  std::optional<int> n;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_paths;
  std::optional<double> horizon;
  std::optional<double> x0;
  std::optional<std::size_t> regime0;
  std::optional<double> epsilon;

  json to_json() const {
    json j = json::object();
    if (tol) j["tol"] = *tol;
    if (dt) j["dt"] = *dt;
    if (n) j["n"] = *n;
    if (seed) j["seed"] = *seed;
    if (n_paths) j["n_paths"] = *n_paths;
    if (horizon) j["horizon"] = *horizon;
    if (x0) j["x0"] = *x0;
    if (regime0) j["regime0"] = *regime0;
    if (epsilon) j["epsilon"] = *epsilon;
    return j;
  }
};

struct CommonArgs {
  std::string config;
  std::string out = ".";
  Overrides overrides;
};

void add_common(CLI::App* app, CommonArgs& args, bool config_required) {
  auto* opt = app->add_option("-c,--config", args.config, "problem config (INI)");
  if (config_required) opt->required();
  app->add_option("-o,--out", args.out, "output directory");
  auto& o = args.overrides;
  app->add_option("--tol", o.tol, "solver tolerance")->check(CLI::PositiveNumber);
  app->add_option("--dt", o.dt, "time step (grid and simulation)")->check(CLI::PositiveNumber);
  app->add_option("--n", o.n, "grid points")->check(CLI::Range(2, 1 << 24));
  app->add_option("--seed", o.seed, "random seed");
  app->add_option("--n-paths", o.n_paths, "Monte Carlo paths");
  app->add_option("--horizon", o.horizon, "simulation horizon")->check(CLI::PositiveNumber);
  app->add_option("--x0", o.x0, "start state");
  app->add_option("--regime0", o.regime0, "start regime");
  app->add_option("--epsilon", o.epsilon, "region threshold")->check(CLI::NonNegativeNumber);
}

ProblemConfig load_with_overrides(const CommonArgs& args) {
  ProblemConfig cfg = load_config(args.config);
  const auto& o = args.overrides;
  auto& run = cfg.run;
  if (o.tol) {
    run.solver.tol = *o.tol;
    if (!run.epsilon_given) run.epsilon = 10.0 * *o.tol;
  }
  if (o.dt) {
    run.grid.dt = *o.dt;
    run.mc.dt = *o.dt;
  }
  if (o.n) run.grid.n_points = *o.n;
  if (o.seed) run.mc.seed = *o.seed;
  if (o.n_paths) run.mc.n_paths = *o.n_paths;
  if (o.horizon) run.mc.horizon = *o.horizon;
  if (o.x0) run.start.x = *o.x0;
  if (o.regime0) run.start.regime = *o.regime0;
  if (o.epsilon) run.epsilon = *o.epsilon;
  run.grid.check();
  if (run.start.regime >= cfg.spec.regime_count) {
    throw Error(ErrorCode::ConfigError, "regime0 out of range");
  }
  return cfg;
}

fs::path prepare_out(const std::string& dir) {
  fs::path out(dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw Error(ErrorCode::ConfigError, "cannot create output directory " + dir);
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string grid_text(const Grid& g) {
  std::ostringstream s;
  s << "x_lo=" << format_number(g.x_lo) << " x_hi=" << format_number(g.x_hi) << " n=" << g.n_points
    << " dt=" << format_number(g.dt);
  return s.str();
}

/// Loads --values when given, otherwise solves the config.
std::shared_ptr<const ValueFields> obtain_fields(const ProblemConfig& cfg, const std::string& values_path,
                                                 bool required) {
  if (!values_path.empty()) {
    auto loaded = read_value_fields(values_path);
    if (loaded.spec_hash != cfg.hash) {
      std::cerr << "warning: " << values_path << " was written for spec_hash=" << hex_hash(loaded.spec_hash)
                << ", config has spec_hash=" << hex_hash(cfg.hash) << "\n";
    }
    return std::make_shared<const ValueFields>(std::move(loaded.fields));
  }
  if (required) throw Error(ErrorCode::MissingFields, "strategy 'optimal' needs --values from a prior solve");
  return std::make_shared<const ValueFields>(solve(cfg.spec, cfg.run.grid, cfg.run.solver));
}

Strategy make_strategy(const std::string& name, const ProblemConfig& cfg, const std::string& values_path) {
  if (name == "none") return Strategy{NoImpulse{}, cfg.run.max_impulses};
  if (name == "cadence") return Strategy{cfg.run.cadence, cfg.run.max_impulses};
  if (name == "optimal") {
    return make_optimal_hitting(obtain_fields(cfg, values_path, true), cfg.run.epsilon, cfg.run.max_impulses);
  }
  throw Error(ErrorCode::ConfigError, "unknown strategy '" + name + "'");
}

std::vector<TraceRow> replay_episodes(const Strategy& strategy, const ProblemConfig& cfg, std::size_t count,
                                      bool record_path) {
  count = std::min(count, cfg.run.mc.n_paths);
  EpisodeOptions episode;
  episode.horizon = cfg.run.mc.horizon;
  episode.dt = cfg.run.mc.dt;
  episode.escape_bound = cfg.run.mc.escape_bound;
  episode.record_path = record_path;
  std::vector<TraceRow> rows(count);
  parallel_for(count, [&](std::size_t p) {
    RngStream rng(cfg.run.mc.seed, p);
    rows[p] = {p, run_episode(strategy, cfg.run.start, episode, cfg.spec, rng)};
  });
  return rows;
}

// --------------------------------------------------------------------------

struct SolveArgs {
  CommonArgs common;
};

int cmd_solve(const SolveArgs& args) {
  const ProblemConfig cfg = load_with_overrides(args.common);
  const fs::path out = prepare_out(args.common.out);
  const auto start = std::chrono::steady_clock::now();
  const ValueFields fields = solve(cfg.spec, cfg.run.grid, cfg.run.solver);
  const double wall = seconds_since(start);
  const Region region = extract_regions(fields, cfg.run.epsilon);

  write_value_fields(out / "values.csv", fields, cfg.hash);
  write_regions(out / "regions.csv", region, cfg.hash);

  json manifest;
  manifest["tool_version"] = kToolVersion;
  manifest["command"] = "solve";
  manifest["config"] = args.common.config;
  manifest["spec_hash"] = hex_hash(cfg.hash);
  manifest["grid"] = {{"x_lo", fields.grid.x_lo},
                      {"x_hi", fields.grid.x_hi},
                      {"n", fields.grid.n_points},
                      {"dt", fields.grid.dt}};
  manifest["interpolation"] = fields.interpolation == Interpolation::LogLinear ? "loglinear" : "linear";
  manifest["tol"] = fields.tol;
  manifest["epsilon"] = cfg.run.epsilon;
  manifest["iterations"] = fields.iterations;
  manifest["residual"] = fields.residual;
  manifest["wall_time_s"] = wall;
  manifest["threads"] = worker_count();
  manifest["overrides"] = args.common.overrides.to_json();
  manifest["outputs"] = {"values.csv", "regions.csv"};
  std::ofstream(out / "manifest.json") << manifest.dump(2) << "\n";

  std::cout << "solve: " << grid_text(fields.grid) << " iterations=" << fields.iterations
            << " residual=" << format_number(fields.residual) << " wall_time_s=" << wall << "\n";
  for (Eigen::Index i = 0; i < fields.regimes(); ++i) {
    std::cout << "  regime " << i << " I:";
    if (region.impulse[static_cast<std::size_t>(i)].empty()) std::cout << " (empty)";
    for (const auto& iv : region.impulse[static_cast<std::size_t>(i)]) {
      std::cout << " [" << iv.lo << ", " << iv.hi << "]";
    }
    std::cout << "\n";
  }
  return kExitPass;
}

// --------------------------------------------------------------------------

struct SimulateArgs {
  CommonArgs common;
  std::string strategy = "optimal";
  std::string values;
  std::size_t trace_episodes = 20;
};

int cmd_simulate(const SimulateArgs& args) {
  const ProblemConfig cfg = load_with_overrides(args.common);
  if (cfg.run.mc.n_paths < 2) throw Error(ErrorCode::InsufficientPaths, "n_paths must be >= 2");
  const Strategy strategy = make_strategy(args.strategy, cfg, args.values);
  const fs::path out = prepare_out(args.common.out);

  const auto episodes = run_episodes(strategy, cfg.run.start, cfg.run.mc, cfg.spec);
  const GainEstimate estimate = summarize(episodes, cfg.run.mc);
  const auto rows = replay_episodes(strategy, cfg, args.trace_episodes, false);

  write_traces(out / "traces.csv", rows, cfg.hash);
  write_episode_summary(out / "summary.csv", episodes, cfg.hash);
  write_gain_estimate(out / "gain.csv", args.strategy, estimate, cfg.hash);

  std::cout << "simulate: strategy=" << args.strategy << " start=(" << cfg.run.start.regime << ", "
            << format_number(cfg.run.start.x) << ") mean=" << format_number(estimate.mean)
            << " stderr=" << format_number(estimate.std_error) << " n_paths=" << estimate.n_paths
            << " tail_bound=" << format_number(estimate.tail_bound) << "\n";
  return kExitPass;
}

// --------------------------------------------------------------------------

struct VerifyArgs {
  CommonArgs common;
  std::string values;
  std::vector<std::string> only;
  int audit_states = 32;
  std::size_t audit_paths = 4000;
  int order = 25;
};

class Report {
 public:
  void check(const std::string& name, bool ok, const std::string& detail) {
    failed_ = failed_ || !ok;
    add(std::string(ok ? "PASS " : "FAIL ") + name + "  " + detail);
  }
  void note(const std::string& name, const std::string& detail) { add("INFO " + name + "  " + detail); }
  bool failed() const { return failed_; }
  const std::string& text() const { return text_; }

 private:
  void add(const std::string& line) {
    std::cout << line << "\n";
    text_ += line + "\n";
  }
  std::string text_;
  bool failed_ = false;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void verify_structure(Report& report, const ValueFields& fields, const ProblemConfig& cfg) {
  SolverOptions options = cfg.run.solver;
  options.tol = fields.tol;
  options.interpolation = fields.interpolation;
  const Field no_impulse = no_impulse_value(cfg.spec, fields.grid, options);
  const Region region = extract_regions(fields, cfg.run.epsilon);
  const StructureReport s = check_structure(fields, no_impulse, region, cfg.spec, options);
  report.check("structure.rho_is_max", s.rho_is_max, "rho == max(rho_plus, m_star) at every grid point");
  report.check("structure.dominance", s.dominance_gap == 0.0,
               "rho_plus >= no_impulse - tol, gap=" + num(s.dominance_gap));
  report.check("structure.rho_plus_positive", s.rho_plus_positive, "rho_plus > 0");
  report.check("structure.complementarity", s.complementarity.max_abs_min <= s.complementarity_tol,
               "max|min(rho - T rho, rho - m*)|=" + num(s.complementarity.max_abs_min) +
                   " tol_c=" + num(s.complementarity_tol));
  report.check("structure.partition", s.partition_ok, "I and C partition the grid");
  report.check("structure.dirac", s.dirac_gap <= 1e-12, "max|integrand(Dirac) - rho_plus|=" + num(s.dirac_gap));
}

void verify_no_impulse_oracle(Report& report, const ValueFields& fields, const ProblemConfig& cfg) {
  const auto& spec = cfg.spec;
  if (spec.kernel.intervention_enabled || spec.profit.form != ProfitSpec::Form::ExpScaled ||
      !has_constant_coefficients(spec)) {
    return;
  }
  const auto& g = fields.grid;
  const auto margin = static_cast<int>(std::floor(0.1 * (g.n_points - 1)));
  double worst = 0.0;
  for (Eigen::Index i = 0; i < fields.regimes(); ++i) {
    const double b = spec.dynamics.drift[static_cast<std::size_t>(i)].intercept;
    const double s = spec.dynamics.volatility[static_cast<std::size_t>(i)].intercept;
    for (int k = margin; k <= g.n_points - 1 - margin; ++k) {
      const double exact = spec.profit.eta * std::exp(g.x(k)) / (spec.beta - b - 0.5 * s * s);
      worst = std::max(worst, std::abs(fields.rho_plus(k, i) / exact - 1.0));
    }
  }
  report.check("oracle.no_impulse", worst <= 0.01, "max relative error on interior 80%=" + num(worst));
}

void verify_audit(Report& report, const ValueFields& fields, const ProblemConfig& cfg, const VerifyArgs& args,
                  const fs::path& out) {
  AuditOptions options;
  options.n_states = args.audit_states;
  options.n_paths = args.audit_paths;
  options.seed = cfg.run.mc.seed;
  options.epsilon = cfg.run.epsilon;
  SolverOptions solver = cfg.run.solver;
  solver.tol = fields.tol;
  solver.interpolation = fields.interpolation;
  const AuditReport audit = audit_optimality(fields, cfg.spec, options, solver);
  write_audit_states(out / "audit_states.csv", audit, cfg.hash);
  const std::string tol = " tol_c=" + num(audit.tol_c);
  if (audit.kernel_checks_skipped) {
    report.note("audit.kernels", "skipped, intervention disabled");
  } else {
    report.check("audit.kernels", audit.kernel_ok(), "max violation=" + num(audit.max_kernel_violation) + tol);
    report.check("audit.rstar", audit.rstar_ok(), "max gap=" + num(audit.max_rstar_gap) + tol);
  }
  report.check("audit.stopping", audit.stopping_ok(),
               "max(violation - 3 stderr)=" + num(audit.max_stopping_excess) + tol);
  report.check("audit.tstar", audit.tstar_ok(), "max(gap - 3 stderr)=" + num(audit.max_tstar_excess) + tol);
}

void verify_fseries(Report& report, const ProblemConfig& cfg, const VerifyArgs& args) {
  const auto& spec = cfg.spec;
  if (!spec.kernel.intervention_enabled) {
    report.note("fseries", "skipped, intervention disabled");
    return;
  }
  if (!has_constant_coefficients(spec)) {
    report.note("fseries", "skipped, UnsupportedDynamics (non-constant coefficients)");
    return;
  }
  const FSeries series = f_series(spec, cfg.run.cadence, args.order, cfg.run.start);
  report.note("fseries.sum", "L=" + std::to_string(series.order) + " partial_sum=" + num(series.partial_sum) +
                                 " tail_bound=" + num(series.tail_bound) + " q=" + num(series.q));
  if (spec.profit.bounded()) {
    double worst = -kInfinity;
    for (int l = 0; l <= series.order; ++l) {
      const double bound = series.profit_sup * std::pow(series.q, l);
      worst = std::max({worst, std::abs(series.f1[l]) - bound, series.f1_sup[l] - bound});
    }
    report.check("fseries.profit_majorant", worst <= 1e-12, "max(|F1(l)| - sup f q^l)=" + num(worst));
  } else {
    report.note("fseries.profit_majorant",
                "unbounded profit, tail from closed-form growth bound=" + num(series.tail_bound));
  }
  if (spec.cost.bounded()) {
    double worst = -kInfinity;
    for (int l = 1; l <= series.order; ++l) {
      const double bound = series.cost_sup * std::pow(series.q, l);
      worst = std::max({worst, std::abs(series.f3[l]) - bound, series.f3_sup[l] - bound});
    }
    if (series.order >= 1) {
      report.check("fseries.cost_majorant", worst <= 1e-12, "max(|F3(l)| - sup c q^l)=" + num(worst));
    }
  } else {
    report.note("fseries.cost_majorant", "unbounded cost, tail from closed-form growth bound");
  }

  const Strategy cadence{cfg.run.cadence, std::numeric_limits<int>::max()};
  const GainEstimate mc = estimate_gain(cadence, cfg.run.start, cfg.run.mc, spec);
  const double diff = std::abs(mc.mean - series.partial_sum);
  const double band = 3.0 * mc.std_error + series.tail_bound + mc.tail_bound;
  report.check("fseries.mc_agreement", diff <= band,
               "|mc - series|=" + num(diff) + " band=" + num(band) + " mc=" + num(mc.mean) +
                   " stderr=" + num(mc.std_error));
}

bool wants(const VerifyArgs& args, const std::string& name) {
  return args.only.empty() || std::find(args.only.begin(), args.only.end(), name) != args.only.end();
}

int cmd_verify(const VerifyArgs& args) {
  const ProblemConfig cfg = load_with_overrides(args.common);
  const fs::path out = prepare_out(args.common.out);
  Report report;
  report.note("spec", "spec_hash=" + hex_hash(cfg.hash) + " tool_version=" + kToolVersion);

  std::shared_ptr<const ValueFields> fields;
  if (wants(args, "structure") || wants(args, "audit")) {
    if (!args.values.empty()) {
      const auto loaded = read_value_fields(args.values);
      report.check("values.spec_hash", loaded.spec_hash == cfg.hash,
                   "file=" + hex_hash(loaded.spec_hash) + " config=" + hex_hash(cfg.hash));
      fields = std::make_shared<const ValueFields>(loaded.fields);
    } else {
      fields = std::make_shared<const ValueFields>(solve(cfg.spec, cfg.run.grid, cfg.run.solver));
    }
    report.note("solve", grid_text(fields->grid) + " iterations=" + std::to_string(fields->iterations) +
                             " residual=" + num(fields->residual));
  }
  if (wants(args, "structure")) {
    verify_structure(report, *fields, cfg);
    verify_no_impulse_oracle(report, *fields, cfg);
  }
  if (wants(args, "audit")) {
    if (fields->interpolation == Interpolation::LogLinear) {
      report.note("audit", "not applicable, log-linear fields have no Markov-chain representation");
    } else {
      verify_audit(report, *fields, cfg, args, out);
    }
  }
  if (wants(args, "fseries")) verify_fseries(report, cfg, args);

  report.note("result", report.failed() ? "FAILED" : "PASSED");
  std::ofstream(out / "audit.txt") << provenance_line(cfg.hash) << "\n" << report.text();
  return report.failed() ? kExitVerifyFailed : kExitPass;
}

// --------------------------------------------------------------------------

struct RegionsArgs {
  std::string values;
  std::string out = ".";
  double epsilon = 1e-6;
};

int cmd_regions(const RegionsArgs& args) {
  const auto loaded = read_value_fields(args.values);
  const fs::path out = prepare_out(args.out);
  const Region region = extract_regions(loaded.fields, args.epsilon);
  write_regions(out / "regions.csv", region, loaded.spec_hash);
  std::cout << "regions: epsilon=" << format_number(args.epsilon) << " -> " << (out / "regions.csv").string()
            << "\n";
  return kExitPass;
}

// --------------------------------------------------------------------------

struct ExportArgs {
  CommonArgs common;
  std::string strategy = "optimal";
  std::string values;
  std::size_t paths = 10;
};

int cmd_export(const ExportArgs& args) {
  const ProblemConfig cfg = load_with_overrides(args.common);
  const Strategy strategy = make_strategy(args.strategy, cfg, args.values);
  const fs::path out = prepare_out(args.common.out);
  ProblemConfig capped = cfg;
  capped.run.mc.n_paths = std::max(cfg.run.mc.n_paths, args.paths);
  const auto rows = replay_episodes(strategy, capped, args.paths, true);
  write_path_dump(out / "paths.csv", rows, cfg.hash);
  write_traces(out / "traces.csv", rows, cfg.hash);
  std::cout << "export: " << rows.size() << " paths -> " << (out / "paths.csv").string() << "\n";
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Impulse control of a regime-switching diffusion: solve, simulate, verify."};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  SolveArgs solve_args;
  auto* solve_cmd = app.add_subcommand("solve", "solve the value fields, write values.csv and regions.csv");
  add_common(solve_cmd, solve_args.common, true);

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo gain of a strategy");
  add_common(sim_cmd, sim_args.common, true);
  sim_cmd->add_option("-s,--strategy", sim_args.strategy, "none | cadence | optimal")
      ->check(CLI::IsMember({"none", "cadence", "optimal"}));
  sim_cmd->add_option("--values", sim_args.values, "values.csv from solve (optimal strategy)");
  sim_cmd->add_option("--trace-episodes", sim_args.trace_episodes, "episodes written to traces.csv");

  VerifyArgs verify_args;
  auto* verify_cmd = app.add_subcommand("verify", "structural invariants, optimality audit, series cross-check");
  add_common(verify_cmd, verify_args.common, true);
  verify_cmd->add_option("--values", verify_args.values, "values.csv to verify (default: solve the config)");
  verify_cmd->add_option("--only", verify_args.only, "subset of structure, audit, fseries")
      ->check(CLI::IsMember({"structure", "audit", "fseries"}))
      ->delimiter(',');
  verify_cmd->add_option("--audit-states", verify_args.audit_states, "sampled states")->check(CLI::PositiveNumber);
  verify_cmd->add_option("--audit-paths", verify_args.audit_paths, "paths per stopping rule");
  verify_cmd->add_option("--order", verify_args.order, "series truncation order")->check(CLI::NonNegativeNumber);

  RegionsArgs regions_args;
  auto* regions_cmd = app.add_subcommand("regions", "recompute regions.csv from values.csv");
  regions_cmd->add_option("--values", regions_args.values, "values.csv")->required();
  regions_cmd->add_option("-o,--out", regions_args.out, "output directory");
  regions_cmd->add_option("--epsilon", regions_args.epsilon, "region threshold")->check(CLI::NonNegativeNumber);

  ExportArgs export_args;
  auto* export_cmd = app.add_subcommand("export", "dump sample paths for plotting");
  add_common(export_cmd, export_args.common, true);
  export_cmd->add_option("-s,--strategy", export_args.strategy, "none | cadence | optimal")
      ->check(CLI::IsMember({"none", "cadence", "optimal"}));
  export_cmd->add_option("--values", export_args.values, "values.csv from solve (optimal strategy)");
  export_cmd->add_option("--paths", export_args.paths, "number of paths");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitUsage;
  }

  try {
    if (*solve_cmd) return cmd_solve(solve_args);
    if (*sim_cmd) return cmd_simulate(sim_args);
    if (*verify_cmd) return cmd_verify(verify_args);
    if (*regions_cmd) return cmd_regions(regions_args);
    if (*export_cmd) return cmd_export(export_args);
  } catch (const Error& e) {
    const int code = exit_code_for(e.code());
    emit_error_record(to_string(e.code()), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    emit_error_record("InternalError", e.what(), kExitNumerical);
    return kExitNumerical;
  }
  return kExitUsage;
}
