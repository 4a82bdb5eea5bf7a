// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.
//
//   acceptance <impulse_cli> <configs dir> <scratch dir>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "impulse/io.hpp"
#include "impulse/montecarlo.hpp"
#include "impulse/qvi_solver.hpp"
#include "impulse/strategy.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace impulse;
using namespace impulse::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    details.push_back(std::string(ok ? "  ok   " : "  FAIL ") + what);
  }
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

using Clock = std::chrono::steady_clock;

// Grids and tolerances pinned by the criteria.
constexpr double kTol = 1e-7;
constexpr double kTolC = 10 * kTol;
constexpr double kDiscFraction = 0.05;  // eps_disc = 0.05 rho_plus

const Grid kExpGrid{-2.0, 2.0, 401, 0.005};
const Grid kExampleGrid{-8.0, 8.0, 401, 0.01};

SolverOptions solver_options() {
  SolverOptions o;
  o.tol = kTol;
  return o;
}

// --------------------------------------------------------------------------

Outcome ac1(std::vector<std::pair<std::string, ValueFields>>& solves) {
  Outcome out;
  const auto spec = exp_no_impulse();

  auto start = Clock::now();
  ValueFields fields = solve(spec, kExpGrid, solver_options());
  const double solve_time = seconds(start);
  double worst = 0.0;
  const int margin = (kExpGrid.n_points - 1) / 10;
  for (Eigen::Index i = 0; i < 2; ++i) {
    const double b = spec.dynamics.drift[i].intercept, s = spec.dynamics.volatility[i].intercept;
    for (int k = margin; k <= kExpGrid.n_points - 1 - margin; ++k) {
      worst = std::max(worst, std::abs(fields.rho_plus(k, i) / exp_value(kExpGrid.x(k), b, s, spec.beta) - 1.0));
    }
  }
  out.require(worst <= 0.01, fmt("solver: max relative error on interior 80%% = %.3e (<= 1e-2)", worst));
  out.require(solve_time <= 60.0, fmt("solver runtime %.1f s (<= 60 s)", solve_time));

  McOptions mc;
  mc.n_paths = 100000;
  mc.horizon = 60.0;
  mc.dt = 0.01;
  mc.seed = 101;
  start = Clock::now();
  const auto g = estimate_gain(Strategy{NoImpulse{}}, {0, 0.0}, mc, spec);
  const double mc_time = seconds(start);
  const double oracle = exp_value(0.0, 0.1, 0.2, spec.beta);
  const double band = 3.0 * g.std_error + g.tail_bound;
  out.require(std::abs(g.mean - oracle) <= band,
              fmt("MC NoImpulse at x=0: mean %.5f vs %.5f, |diff| %.2e <= 3 stderr + tail %.2e", g.mean, oracle,
                  std::abs(g.mean - oracle), band));
  out.require(mc_time <= 60.0, fmt("MC runtime %.1f s (<= 60 s)", mc_time));
  solves.emplace_back("AC-1 no-impulse solve", std::move(fields));
  return out;
}

// --------------------------------------------------------------------------

Outcome ac2() {
  Outcome out;
  const auto spec = arctan_swap();
  const FixedCadence cadence{1.0, 0.3};
  const State start{0, 0.0};
  const int order = 25;
  const auto t0 = Clock::now();

  const FSeries series = f_series(spec, cadence, order, start);
  const double q = std::exp(-0.5);
  out.require(std::abs(series.q - q) <= 1e-15, fmt("q = %.9f (e^-0.5)", series.q));

  const double f_sup = std::numbers::pi;  // sup of atan + pi/2
  const double c_sup = 1.0;               // sup of 1 - 1/(1 + d^2)
  double f1_excess = -1.0, f3_excess = -1.0;
  for (int l = 0; l <= order; ++l) {
    const double bound = f_sup * std::pow(q, l);
    f1_excess = std::max({f1_excess, std::abs(series.f1[l]) - bound, series.f1_sup[l] - bound});
  }
  for (int l = 1; l <= order; ++l) {
    const double bound = c_sup * std::pow(q, l);
    f3_excess = std::max({f3_excess, std::abs(series.f3[l]) - bound, series.f3_sup[l] - bound});
  }
  out.require(f1_excess <= 0.0, fmt("|F1(l)| <= sup f q^l for l=0..25, max excess %.3e", f1_excess));
  out.require(f3_excess <= 0.0, fmt("|F3(l)| <= sup c q^l for l=1..25, max excess %.3e", f3_excess));

  McOptions mc;
  mc.n_paths = 100000;
  mc.horizon = 40.0;
  mc.dt = 0.01;
  mc.seed = 202;
  const auto g = estimate_gain(Strategy{cadence, 1000}, start, mc, spec);
  const double band = 3.0 * g.std_error + series.tail_bound + g.tail_bound;
  const double diff = std::abs(g.mean - series.partial_sum);
  out.require(diff <= band, fmt("series %.6f vs MC %.6f (stderr %.2e): |diff| %.2e <= %.2e", series.partial_sum,
                                g.mean, g.std_error, diff, band));
  const double elapsed = seconds(t0);
  out.require(elapsed <= 120.0, fmt("runtime %.1f s (<= 120 s)", elapsed));
  return out;
}

// --------------------------------------------------------------------------

struct ExampleSolve {
  std::shared_ptr<const ValueFields> fields;
  double seconds = 0.0;
};

ExampleSolve example_solve() {
  const auto t0 = Clock::now();
  auto fields = std::make_shared<const ValueFields>(solve(arctan_swap(), kExampleGrid, solver_options()));
  return {fields, seconds(t0)};
}

Outcome ac3(const ExampleSolve& ex) {
  Outcome out;
  const auto spec = arctan_swap();
  const auto t0 = Clock::now();
  const auto& fields = *ex.fields;
  const Strategy optimal = make_optimal_hitting(ex.fields, kTolC);
  const auto& region = *std::get<OptimalHitting>(optimal.rule).region;

  McOptions mc;
  mc.n_paths = 20000;
  mc.horizon = 25.0;
  mc.dt = kExampleGrid.dt;
  mc.seed = 303;

  std::vector<std::pair<std::string, Strategy>> rivals;
  rivals.emplace_back("NoImpulse", Strategy{NoImpulse{}});
  for (double dm : {-0.25, -0.5, -1.0}) {
    Strategy s = optimal;
    std::get<OptimalHitting>(s.rule).m_offset = dm;
    rivals.emplace_back(fmt("OptimalHitting m%+.2f", dm), s);
  }
  rivals.emplace_back("FixedCadence t0=0.8 m=1", Strategy{FixedCadence{0.8, 1.0}});
  rivals.emplace_back("FixedCadence t0=1.25 m=1", Strategy{FixedCadence{1.25, 1.0}});

  const State starts[] = {{0, 1.5}, {0, 2.5}, {0, 4.0}, {1, 2.0}, {1, 3.0}};
  for (const auto& st : starts) {
    const bool interior = region.in_continuation(st.regime, st.x) &&
                          region.in_continuation(st.regime, st.x - 0.5) &&
                          region.in_continuation(st.regime, st.x + 0.5);
    out.require(interior, fmt("start (%zu, %.1f) lies in the interior of C", st.regime, st.x));
    const double rho_plus = interpolate(fields.rho_plus.col(static_cast<Eigen::Index>(st.regime)), kExampleGrid, st.x);
    const double eps_disc = kDiscFraction * rho_plus;
    const auto g = estimate_gain(optimal, st, mc, spec);
    const double diff = std::abs(g.mean - rho_plus);
    out.require(diff <= 3.0 * g.std_error + eps_disc + g.tail_bound,
                fmt("(%zu, %.1f): MC %.5f vs rho_plus %.5f, |diff| %.2e <= 3 stderr %.2e + eps_disc %.3f + tail %.1e",
                    st.regime, st.x, g.mean, rho_plus, diff, 3.0 * g.std_error, eps_disc, g.tail_bound));
    double worst_margin = std::numeric_limits<double>::infinity();
    std::string worst_name;
    for (const auto& [name, rival] : rivals) {
      const auto r = estimate_gain(rival, st, mc, spec);
      const double margin = g.mean + 3.0 * g.std_error + eps_disc - r.mean;
      if (margin < worst_margin) {
        worst_margin = margin;
        worst_name = name + fmt(" (%.5f)", r.mean);
      }
    }
    out.require(worst_margin >= 0.0, fmt("(%zu, %.1f): dominates NoImpulse and 5 perturbed strategies, tightest %s, "
                                         "margin %.4f",
                                         st.regime, st.x, worst_name.c_str(), worst_margin));
  }
  const double elapsed = seconds(t0) + ex.seconds;
  out.require(elapsed <= 600.0, fmt("runtime %.1f s including the solve (<= 600 s)", elapsed));
  return out;
}

// --------------------------------------------------------------------------

Outcome ac4(const ExampleSolve& ex) {
  Outcome out;
  AuditOptions opt;
  opt.n_states = 32;
  opt.n_paths = 4000;
  opt.seed = 404;
  opt.epsilon = kTolC;
  const auto report = audit_optimality(*ex.fields, arctan_swap(), opt, solver_options());
  out.require(report.tol_c == kTolC, fmt("tol_c = %.1e", report.tol_c));
  out.require(report.states.size() == 32, fmt("%zu sampled states", report.states.size()));
  out.require(!report.kernel_checks_skipped && report.max_kernel_violation <= kTolC,
              fmt("one-impulse inequality over random kernels: max violation %.2e <= tol_c",
                  report.max_kernel_violation));
  out.require(report.max_rstar_gap <= kTolC, fmt("equality at r*: max gap %.2e <= tol_c", report.max_rstar_gap));
  out.require(report.max_stopping_excess <= kTolC,
              fmt("first-impulse inequality over random stopping rules: max(violation - 3 stderr) %.2e <= tol_c",
                  report.max_stopping_excess));
  out.require(report.max_tstar_excess <= kTolC,
              fmt("equality at T*: max(gap - 3 stderr) %.2e <= tol_c", report.max_tstar_excess));
  return out;
}

// --------------------------------------------------------------------------

Outcome ac5(const std::vector<std::pair<std::string, ValueFields>>& solves, const ProblemSpec& exp_spec,
            const ProblemSpec& example_spec) {
  Outcome out;
  for (const auto& [name, fields] : solves) {
    const auto& spec = name.rfind("AC-1", 0) == 0 ? exp_spec : example_spec;
    SolverOptions opt = solver_options();
    opt.interpolation = fields.interpolation;
    const Field no_impulse = no_impulse_value(spec, fields.grid, opt);
    const Region region = extract_regions(fields, kTolC);
    const auto s = check_structure(fields, no_impulse, region, spec, opt);
    out.require(s.rho_is_max, name + ": rho == max(rho_plus, m_star) exactly");
    out.require(s.dominance_gap == 0.0, name + fmt(": rho_plus >= no_impulse - tol (gap %.1e)", s.dominance_gap));
    out.require(s.rho_plus_positive, name + ": rho_plus > 0");
    out.require(s.complementarity.max_abs_min <= kTolC,
                name + fmt(": complementarity residual %.2e <= tol_c", s.complementarity.max_abs_min));
    out.require(s.partition_ok, name + ": I and C partition the grid");
    out.require(s.dirac_gap <= 1e-12, name + fmt(": Dirac consistency %.1e", s.dirac_gap));
  }
  return out;
}

// --------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run(const std::string& command) { return std::system(command.c_str()); }

Outcome ac6(const fs::path& cli, const fs::path& configs, const fs::path& scratch) {
  Outcome out;
  const std::string exe = "\"" + cli.string() + "\"";
  struct Run {
    std::string threads;
    fs::path dir;
  };
  const std::vector<Run> runs = {{"1", scratch / "det_a"}, {"1", scratch / "det_b"}, {"3", scratch / "det_c"}};
  const auto example = (configs / "arctan_swap.ini").string();
  const auto expcfg = (configs / "exp_no_impulse.ini").string();
  for (const auto& r : runs) {
    fs::remove_all(r.dir);
    const std::string env = "IMPULSE_THREADS=" + r.threads + " ";
    const std::string quiet = " > /dev/null";
    const auto solve_dir = (r.dir / "solve").string();
    int rc = run(env + exe + " solve -c " + example + " -o " + solve_dir + " --n 161" + quiet);
    rc |= run(env + exe + " simulate -c " + example + " -o " + (r.dir / "optimal").string() + " --values " +
              solve_dir + "/values.csv --n-paths 3000 --seed 606 -s optimal" + quiet);
    rc |= run(env + exe + " simulate -c " + example + " -o " + (r.dir / "cadence").string() +
              " --n-paths 3000 --seed 606 -s cadence" + quiet);
    rc |= run(env + exe + " simulate -c " + expcfg + " -o " + (r.dir / "exp").string() +
              " --n-paths 3000 --horizon 20 -s none" + quiet);
    rc |= run(env + exe + " export -c " + example + " -o " + (r.dir / "export").string() + " --values " + solve_dir +
              "/values.csv --paths 5 --x0 -1" + quiet);
    out.require(rc == 0, "CLI pipeline with IMPULSE_THREADS=" + r.threads + " exits 0");
  }
  std::size_t compared = 0, identical = 0;
  for (const auto& entry : fs::recursive_directory_iterator(runs[0].dir)) {
    if (entry.path().extension() != ".csv") continue;
    const auto rel = fs::relative(entry.path(), runs[0].dir);
    const std::string reference = slurp(entry.path());
    for (std::size_t r = 1; r < runs.size(); ++r) {
      ++compared;
      if (slurp(runs[r].dir / rel) == reference) {
        ++identical;
      } else {
        out.require(false, "differs: " + rel.string() + " (IMPULSE_THREADS=" + runs[r].threads + ")");
      }
    }
  }
  out.require(compared >= 20 && identical == compared,
              fmt("%zu/%zu CSV comparisons byte-identical (repeat run, and IMPULSE_THREADS 1 vs 3)", identical,
                  compared));

  // In-process: a repeated estimate under a different worker count.
  const auto spec = arctan_swap();
  McOptions mc;
  mc.n_paths = 2000;
  mc.horizon = 10.0;
  mc.seed = 607;
  setenv("IMPULSE_THREADS", "1", 1);
  const auto a = estimate_gain(Strategy{FixedCadence{1.0, 0.3}}, {0, 0.0}, mc, spec);
  setenv("IMPULSE_THREADS", "4", 1);
  const auto b = estimate_gain(Strategy{FixedCadence{1.0, 0.3}}, {0, 0.0}, mc, spec);
  unsetenv("IMPULSE_THREADS");
  out.require(a.mean == b.mean && a.std_error == b.std_error && a.impulse_histogram == b.impulse_histogram,
              fmt("estimate_gain identical across 1 and 4 workers (mean %.17g)", a.mean));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: acceptance <impulse_cli> <configs dir> <scratch dir>\n";
    return 2;
  }
  const fs::path cli = argv[1], configs = argv[2], scratch = argv[3];
  fs::create_directories(scratch);

  struct Criterion {
    std::string id;
    std::string title;
    std::function<Outcome()> run;
  };
  std::vector<std::pair<std::string, ValueFields>> solves;
  ExampleSolve example;

  const std::vector<Criterion> criteria = {
      {"AC-1", "analytic no-impulse oracle", [&] { return ac1(solves); }},
      {"AC-2", "F-series vs Monte Carlo", [&] { return ac2(); }},
      {"AC-3", "solver-simulator consistency and dominance",
       [&] {
         example = example_solve();
         solves.emplace_back("AC-3 example solve", *example.fields);
         return ac3(example);
       }},
      {"AC-4", "optimality criterion audit", [&] { return ac4(example); }},
      {"AC-5", "structural invariants", [&] { return ac5(solves, exp_no_impulse(), arctan_swap()); }},
      {"AC-6", "determinism", [&] { return ac6(cli, configs, scratch); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome.require(false, std::string("exception: ") + e.what());
    }
    std::cout << (outcome.pass ? "[PASS] " : "[FAIL] ") << c.id << " " << c.title
              << fmt(" (%.1f s)", seconds(t0)) << "\n";
    for (const auto& line : outcome.details) std::cout << line << "\n";
    std::cout.flush();
    failed += outcome.pass ? 0 : 1;
  }
  std::cout << (failed == 0 ? "acceptance: all criteria passed\n" : fmt("acceptance: %d criteria failed\n", failed));
  return failed == 0 ? 0 : 1;
}
