#pragma once

#include <cstdint>
#include <vector>

#include "impulse/model.hpp"
#include "impulse/qvi_solver.hpp"
#include "impulse/strategy.hpp"

namespace impulse {

struct McOptions {
  std::size_t n_paths = 10000;
  double horizon = 30.0;
  double dt = 0.01;
  std::uint64_t seed = 1;
  double escape_bound = 1e6;
};

/// Per-episode outcome kept by the estimator.
struct EpisodeSummary {
  double gain = 0.0;
  std::size_t n_impulses = 0;
  StopReason stopped_reason = StopReason::HorizonReached;
  double tail_bound = 0.0;  // bound on the neglected post-horizon gain
};

struct GainEstimate {
  double mean = 0.0;
  double std_error = 0.0;  // sample std / sqrt(n_paths)
  std::size_t n_paths = 0;
  double horizon = 0.0;
  double dt = 0.0;
  double tail_bound = 0.0;
  std::vector<std::size_t> impulse_histogram;  // index = impulse count
};

/// Bound on |gain after the horizon| for one finished episode.
double episode_tail_bound(const Strategy& strategy, const StrategyTrace& trace, const McOptions& options,
                          const ProblemSpec& spec);

/// Episode p runs on RngStream(seed, p), so two strategies evaluated with the
/// same seed share random numbers path by path.
std::vector<EpisodeSummary> run_episodes(const Strategy& strategy, const State& start, const McOptions& options,
                                         const ProblemSpec& spec);

GainEstimate summarize(const std::vector<EpisodeSummary>& episodes, const McOptions& options);

GainEstimate estimate_gain(const Strategy& strategy, const State& start, const McOptions& options,
                           const ProblemSpec& spec);

struct FSeriesOptions {
  int hermite_nodes = 32;
  int time_nodes = 24;
  double x_lo = -40.0;
  double x_hi = 40.0;
  int n_points = 3201;
};

/// Truncated per-cycle expansion of the expected gain of a fixed-cadence
/// strategy, evaluated at one start state.
struct FSeries {
  int order = 0;
  std::vector<double> f1;      // F1(l), l = 0..L
  std::vector<double> f3;      // F3(l), l = 0..L; F3(0) is undefined and kept 0
  std::vector<double> f1_sup;  // sup over the function grid, per level
  std::vector<double> f3_sup;
  double partial_sum = 0.0;    // sum F1(0..L) - sum F3(1..L)
  double tail_bound = 0.0;
  bool tail_from_growth = false;  // exponential forms: closed-form growth bound
  double q = 0.0;                 // E[exp(-beta tau0)] = exp(-beta t0)
  double profit_sup = 0.0;
  double cost_sup = 0.0;
};

/// Requires constant coefficients (UnsupportedDynamics otherwise).
FSeries f_series(const ProblemSpec& spec, const FixedCadence& cadence, int order, const State& start,
                 const FSeriesOptions& options = {});

struct AuditOptions {
  int n_states = 32;
  std::uint64_t seed = 7;
  int random_kernels = 5;
  std::size_t n_paths = 4000;
  double horizon = 10.0;
  double interior_fraction = 0.8;
  double epsilon = -1.0;  // region threshold; negative means 10 * tol
};

struct StateAudit {
  RegimeId regime = 0;
  double x = 0.0;
  double rho = 0.0;
  double rho_plus = 0.0;
  double kernel_violation = 0.0;    // max(0, integrand(r) - m rho+) over sampled r
  double rstar_gap = 0.0;           // |m rho+ - integrand(r*)|
  double stopping_violation = 0.0;  // worst (estimate - rho+) over random rules
  double stopping_stderr = 0.0;
  double tstar_gap = 0.0;           // |estimate(T*) - rho+|
  double tstar_stderr = 0.0;
};

struct AuditReport {
  std::vector<StateAudit> states;
  double tol_c = 0.0;
  bool kernel_checks_skipped = false;
  double max_kernel_violation = 0.0;
  double max_rstar_gap = 0.0;
  double max_stopping_excess = 0.0;  // max(violation - 3 stderr)
  double max_tstar_excess = 0.0;     // max(gap - 3 stderr)

  bool kernel_ok() const { return kernel_checks_skipped || max_kernel_violation <= tol_c; }
  bool rstar_ok() const { return kernel_checks_skipped || max_rstar_gap <= tol_c; }
  bool stopping_ok() const { return max_stopping_excess <= tol_c; }
  bool tstar_ok() const { return max_tstar_excess <= tol_c; }
  bool passed() const { return kernel_ok() && rstar_ok() && stopping_ok() && tstar_ok(); }
};

/// Checks the one-impulse inequality against random kernels (equality at r*)
/// and the first-impulse dynamic-programming inequality against random
/// stopping rules (equality at the hitting time of I). The stopping checks
/// simulate the solver's own Markov chain: Gauss-Hermite node draws followed
/// by randomized rounding to the neighbouring grid points.
AuditReport audit_optimality(const ValueFields& fields, const ProblemSpec& spec, const AuditOptions& options,
                             const SolverOptions& solver_options = {});

}  // namespace impulse
