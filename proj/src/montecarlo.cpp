#include "impulse/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "impulse/parallel.hpp"
#include "impulse/quadrature.hpp"

namespace impulse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Sum_{l > order} ratio^l
double geometric_tail(double ratio, int order) {
  if (!(ratio < 1.0)) return kInf;
  return std::pow(ratio, order + 1) / (1.0 - ratio);
}

}  // namespace

double episode_tail_bound(const Strategy& strategy, const StrategyTrace& trace, const McOptions& options,
                          const ProblemSpec& spec) {
  const double decay = std::exp(-spec.beta * options.horizon);
  double profit_tail;
  if (spec.profit.bounded()) {
    profit_tail = spec.profit.sup() * decay / spec.beta;
  } else {
    const double margin = spec.beta - max_exponential_growth(spec);
    profit_tail = margin > 0.0 ? spec.profit.eta * std::exp(trace.final_state.x) * decay / margin : kInf;
  }

  double cost_tail = 0.0;
  if (const auto* cadence = std::get_if<FixedCadence>(&strategy.rule)) {
    const double remaining = std::max(0, strategy.max_impulses - static_cast<int>(trace.impulses.size()));
    if (remaining > 0) cost_tail = spec.cost.sup() * decay / (-std::expm1(-spec.beta * cadence->t0));
  } else if (std::holds_alternative<OptimalHitting>(strategy.rule)) {
    const int remaining = std::max(0, strategy.max_impulses - static_cast<int>(trace.impulses.size()));
    if (remaining > 0) cost_tail = spec.cost.sup() * decay * remaining;
  }
  return profit_tail + cost_tail;
}

std::vector<EpisodeSummary> run_episodes(const Strategy& strategy, const State& start, const McOptions& options,
                                         const ProblemSpec& spec) {
  if (options.n_paths < 2) throw Error(ErrorCode::InsufficientPaths, "n_paths must be >= 2");
  std::vector<EpisodeSummary> out(options.n_paths);
  EpisodeOptions episode;
  episode.horizon = options.horizon;
  episode.dt = options.dt;
  episode.escape_bound = options.escape_bound;
  parallel_for(options.n_paths, [&](std::size_t p) {
    RngStream rng(options.seed, p);
    const auto trace = run_episode(strategy, start, episode, spec, rng);
    out[p] = {trace.gain, trace.impulses.size(), trace.stopped_reason,
              episode_tail_bound(strategy, trace, options, spec)};
  });
  return out;
}

GainEstimate summarize(const std::vector<EpisodeSummary>& episodes, const McOptions& options) {
  const std::size_t n = episodes.size();
  if (n < 2) throw Error(ErrorCode::InsufficientPaths, "need at least two episodes");
  GainEstimate est;
  est.n_paths = n;
  est.horizon = options.horizon;
  est.dt = options.dt;
  double sum = 0.0;
  double tail = 0.0;
  for (const auto& e : episodes) {
    sum += e.gain;
    tail += e.tail_bound;
    if (e.n_impulses >= est.impulse_histogram.size()) est.impulse_histogram.resize(e.n_impulses + 1, 0);
    ++est.impulse_histogram[e.n_impulses];
  }
  est.mean = sum / static_cast<double>(n);
  double squares = 0.0;
  for (const auto& e : episodes) squares += (e.gain - est.mean) * (e.gain - est.mean);
  est.std_error = std::sqrt(squares / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
  est.tail_bound = tail / static_cast<double>(n);
  return est;
}

GainEstimate estimate_gain(const Strategy& strategy, const State& start, const McOptions& options,
                           const ProblemSpec& spec) {
  return summarize(run_episodes(strategy, start, options, spec), options);
}

// ---------------------------------------------------------------------------
// F-series

namespace {

class CycleOperators {
 public:
  CycleOperators(const ProblemSpec& spec, const FixedCadence& cadence, const FSeriesOptions& options)
      : spec_(spec),
        cadence_(cadence),
        grid_{options.x_lo, options.x_hi, options.n_points, cadence.t0},
        mode_(spec.profit.bounded() && spec.cost.bounded() ? Interpolation::Linear : Interpolation::LogLinear),
        hermite_(gauss_hermite_normal<double>(options.hermite_nodes)),
        time_(gauss_legendre<double>(options.time_nodes, 0.0, cadence.t0)),
        q_(std::exp(-spec.beta * cadence.t0)) {
    grid_.check();
    require_valid(spec);
  }

  const Grid& grid() const { return grid_; }
  double q() const { return q_; }
  Eigen::Index regimes() const { return static_cast<Eigen::Index>(spec_.regime_count); }

  // Integral over [0, t0] of exp(-beta t) E f(i, x + b_i t + sigma_i W_t)
  double first_profit(RegimeId i, double x) const {
    const double b = spec_.dynamics.drift[i].intercept;
    const double s = spec_.dynamics.volatility[i].intercept;
    double total = 0.0;
    for (Eigen::Index a = 0; a < time_.size(); ++a) {
      const double t = time_.nodes[a];
      const double spread = s * std::sqrt(t);
      const double mean = hermite_.apply([&](double z) { return eval_profit(spec_, i, x + b * t + spread * z); });
      total += time_.weights[a] * std::exp(-spec_.beta * t) * mean;
    }
    return total;
  }

  // Sum_j p_ij E c(i, x, j, x + m + s Z)
  double first_cost(RegimeId i, double x) const {
    double total = 0.0;
    for (RegimeId j = 0; j < spec_.regime_count; ++j) {
      const double pij = weight(i, j);
      if (pij <= 0.0) continue;
      total += pij * hermite_.apply([&](double z) {
        return eval_cost(spec_, i, x, j, x + cadence_.m + spec_.kernel.jump_std * z);
      });
    }
    return total;
  }

  // exp(-beta t0) E H(i, Y_{t0-}) from x
  double diffuse(const Field& h, RegimeId i, double x) const {
    const double b = spec_.dynamics.drift[i].intercept;
    const double s = spec_.dynamics.volatility[i].intercept;
    const double t0 = cadence_.t0;
    const auto column = h.col(static_cast<Eigen::Index>(i));
    return q_ * hermite_.apply(
                    [&](double z) { return interpolate(column, grid_, x + b * t0 + s * std::sqrt(t0) * z, mode_); });
  }

  // Sum_j p_ij E H(j, x + m + s Z)
  double jump(const Field& h, RegimeId i, double x) const {
    double total = 0.0;
    for (RegimeId j = 0; j < spec_.regime_count; ++j) {
      const double pij = weight(i, j);
      if (pij <= 0.0) continue;
      const auto column = h.col(static_cast<Eigen::Index>(j));
      total += pij * hermite_.apply([&](double z) {
        return interpolate(column, grid_, x + cadence_.m + spec_.kernel.jump_std * z, mode_);
      });
    }
    return total;
  }

  template <typename F>
  Field tabulate(F&& f) const {
    Field out(grid_.n_points, regimes());
    for (Eigen::Index i = 0; i < regimes(); ++i) {
      parallel_for(static_cast<std::size_t>(grid_.n_points), [&](std::size_t k) {
        out(static_cast<Eigen::Index>(k), i) = f(static_cast<RegimeId>(i), grid_.x(static_cast<Eigen::Index>(k)));
      });
    }
    return out;
  }

 private:
  double weight(RegimeId i, RegimeId j) const {
    return spec_.kernel.switch_matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  const ProblemSpec& spec_;
  FixedCadence cadence_;
  Grid grid_;
  Interpolation mode_;
  QuadratureRule<double> hermite_;
  QuadratureRule<double> time_;
  double q_;
};

}  // namespace

FSeries f_series(const ProblemSpec& spec, const FixedCadence& cadence, int order, const State& start,
                 const FSeriesOptions& options) {
  if (!has_constant_coefficients(spec)) {
    throw Error(ErrorCode::UnsupportedDynamics, "F-series needs constant drift and volatility");
  }
  if (order < 0) throw Error(ErrorCode::InvalidArgument, "order must be >= 0");
  if (!(cadence.t0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "cadence t0 must be > 0");
  if (cadence.m < spec.kernel.m_lo || cadence.m > spec.kernel.m_hi) {
    throw Error(ErrorCode::ParameterOutOfBox, "cadence jump mean outside [m_lo, m_hi]");
  }

  const CycleOperators ops(spec, cadence, options);
  FSeries series;
  series.order = order;
  series.q = ops.q();
  series.profit_sup = spec.profit.sup();
  series.cost_sup = spec.cost.sup();
  series.f1.assign(order + 1, 0.0);
  series.f3.assign(order + 1, 0.0);
  series.f1_sup.assign(order + 1, 0.0);
  series.f3_sup.assign(order + 1, 0.0);

  const RegimeId i0 = start.regime;
  const double x0 = start.x;

  Field f1 = ops.tabulate([&](RegimeId i, double x) { return ops.first_profit(i, x); });
  Field f4 = ops.tabulate([&](RegimeId i, double x) { return ops.first_cost(i, x); });
  series.f1[0] = ops.first_profit(i0, x0);
  series.f1_sup[0] = f1.abs().maxCoeff();

  for (int l = 1; l <= order; ++l) {
    const Field f2 = ops.tabulate([&](RegimeId i, double x) { return ops.jump(f1, i, x); });
    series.f1[l] = ops.diffuse(f2, i0, x0);
    f1 = ops.tabulate([&](RegimeId i, double x) { return ops.diffuse(f2, i, x); });
    series.f1_sup[l] = f1.abs().maxCoeff();

    series.f3[l] = ops.diffuse(f4, i0, x0);
    const Field f3 = ops.tabulate([&](RegimeId i, double x) { return ops.diffuse(f4, i, x); });
    series.f3_sup[l] = f3.abs().maxCoeff();
    f4 = ops.tabulate([&](RegimeId i, double x) { return ops.jump(f3, i, x); });
  }

  double sum = 0.0;
  for (int l = 0; l <= order; ++l) sum += series.f1[l];
  for (int l = 1; l <= order; ++l) sum -= series.f3[l];
  series.partial_sum = sum;

  const double q = series.q;
  const double t0 = cadence.t0;
  double profit_tail;
  double cost_tail;
  // Growth of E exp(Y) over one cycle: diffusion then jump.
  double diffusion_growth = 0.0;
  for (RegimeId i = 0; i < spec.regime_count; ++i) {
    const double b = spec.dynamics.drift[i].intercept;
    const double s = spec.dynamics.volatility[i].intercept;
    diffusion_growth = std::max(diffusion_growth, std::exp((b + 0.5 * s * s) * t0));
  }
  const double s_jump = spec.kernel.jump_std;
  const double jump_growth = std::exp(cadence.m + 0.5 * s_jump * s_jump);
  const double cycle_ratio = q * diffusion_growth * jump_growth;

  if (spec.profit.bounded()) {
    // One cycle of profit is at most sup f (1 - q) / beta.
    profit_tail = series.profit_sup * std::max(1.0, (1.0 - q) / spec.beta) * geometric_tail(q, order);
  } else {
    series.tail_from_growth = true;
    double per_cycle = 0.0;
    for (RegimeId i = 0; i < spec.regime_count; ++i) {
      const double b = spec.dynamics.drift[i].intercept;
      const double s = spec.dynamics.volatility[i].intercept;
      const double kappa = spec.beta - b - 0.5 * s * s;
      per_cycle = std::max(per_cycle, kappa == 0.0 ? t0 : -std::expm1(-kappa * t0) / kappa);
    }
    profit_tail = spec.profit.eta * std::exp(x0) * per_cycle * geometric_tail(cycle_ratio, order);
  }
  if (spec.cost.bounded()) {
    cost_tail = series.cost_sup * geometric_tail(q, order);
  } else {
    series.tail_from_growth = true;
    const double mu = spec.cost.mu;
    const double first = std::exp(mu * cadence.m + 0.5 * mu * mu * s_jump * s_jump);
    cost_tail = first * std::exp(x0) / jump_growth * geometric_tail(cycle_ratio, order);
  }
  series.tail_bound = profit_tail + cost_tail;
  return series;
}

// ---------------------------------------------------------------------------
// Optimality audit

namespace {

enum class StoppingRule { HittingTime, FixedTime, UpperThreshold, Band };

struct RuleParameters {
  StoppingRule rule;
  long fixed_steps = 0;
  double threshold = 0.0;
};

struct ChainEstimate {
  double mean;
  double std_error;
};

// Simulates the Bellman operator's Markov chain from grid point k0 of regime
// i and returns the mean of (discounted running profit + discounted rho at
// the stopping time).
ChainEstimate chain_estimate(const BellmanOperator& op, const ValueFields& fields, const std::vector<bool>& in_impulse,
                             const std::vector<double>& cumulative, RegimeId i, Eigen::Index k0,
                             const RuleParameters& rule, std::size_t n_paths, long max_steps, std::uint64_t seed,
                             std::uint64_t stream_base) {
  const auto col = static_cast<Eigen::Index>(i);
  const auto& profit = op.running_profit();
  const double decay = op.decay();
  const auto nodes = static_cast<Eigen::Index>(cumulative.size());
  const double x0 = fields.grid.x(k0);
  std::vector<double> samples(n_paths);
  parallel_for(n_paths, [&](std::size_t p) {
    RngStream rng(seed, stream_base + p);
    Eigen::Index k = k0;
    double discount = 1.0;
    double total = 0.0;
    for (long step = 1;; ++step) {
      total += discount * profit(k, col);
      const double u = rng.uniform();
      Eigen::Index q = 0;
      while (q + 1 < nodes && u >= cumulative[q]) ++q;
      const Bracket& b = op.euler_bracket(i, k, q);
      k = rng.uniform() < b.weight ? b.left + 1 : b.left;
      discount *= decay;
      const double x = fields.grid.x(k);
      bool stop = step >= max_steps;
      switch (rule.rule) {
        case StoppingRule::HittingTime: stop = stop || in_impulse[k]; break;
        case StoppingRule::FixedTime: stop = stop || step >= rule.fixed_steps; break;
        case StoppingRule::UpperThreshold: stop = stop || x >= x0 + rule.threshold; break;
        case StoppingRule::Band: stop = stop || std::abs(x - x0) >= rule.threshold; break;
      }
      if (stop) {
        total += discount * fields.rho(k, col);
        break;
      }
    }
    samples[p] = total;
  });
  const double n = static_cast<double>(n_paths);
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double squares = 0.0;
  for (double s : samples) squares += (s - mean) * (s - mean);
  return {mean, std::sqrt(squares / (n - 1.0)) / std::sqrt(n)};
}

}  // namespace

AuditReport audit_optimality(const ValueFields& fields, const ProblemSpec& spec, const AuditOptions& options,
                             const SolverOptions& solver_options) {
  if (options.n_paths < 2) throw Error(ErrorCode::InsufficientPaths, "audit needs n_paths >= 2");
  SolverOptions solver = solver_options;
  solver.interpolation = fields.interpolation;
  const BellmanOperator op(spec, fields.grid, solver);
  const Grid& grid = fields.grid;

  AuditReport report;
  report.tol_c = 10.0 * fields.tol;
  report.kernel_checks_skipped = !spec.kernel.intervention_enabled;
  const double epsilon = options.epsilon >= 0.0 ? options.epsilon : 10.0 * fields.tol;

  std::vector<double> cumulative(static_cast<std::size_t>(op.diffusion_rule().size()));
  std::partial_sum(op.diffusion_rule().weights.begin(), op.diffusion_rule().weights.end(), cumulative.begin());

  std::vector<std::vector<bool>> in_impulse(spec.regime_count, std::vector<bool>(grid.n_points, false));
  for (RegimeId i = 0; i < spec.regime_count; ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    for (Eigen::Index k = 0; k < grid.n_points; ++k) {
      const double m = fields.m_star(k, col);
      in_impulse[i][k] = m != kNoIntervention && fields.rho(k, col) - m <= epsilon;
    }
  }

  const auto margin = static_cast<Eigen::Index>(std::floor(0.5 * (1.0 - options.interior_fraction) * (grid.n_points - 1)));
  const Eigen::Index k_lo = margin;
  const Eigen::Index k_hi = grid.n_points - 1 - margin;
  const long max_steps = std::max(1L, std::lround(options.horizon / grid.dt));

  RngStream picker(options.seed, 0);
  std::uint64_t stream = 1;
  for (int s = 0; s < options.n_states; ++s) {
    StateAudit a;
    a.regime = std::min<RegimeId>(spec.regime_count - 1,
                                  static_cast<RegimeId>(picker.uniform() * static_cast<double>(spec.regime_count)));
    const auto span = static_cast<double>(k_hi - k_lo + 1);
    const Eigen::Index k = std::min(k_hi, k_lo + static_cast<Eigen::Index>(picker.uniform() * span));
    const auto col = static_cast<Eigen::Index>(a.regime);
    a.x = grid.x(k);
    a.rho = fields.rho(k, col);
    a.rho_plus = fields.rho_plus(k, col);

    // One-impulse inequality over sampled kernels, equality at r*.
    const double dirac = op.integrand(fields.rho_plus, a.regime, a.x, KernelMember::dirac_mass());
    a.kernel_violation = std::max(0.0, dirac - a.rho);
    if (!report.kernel_checks_skipped) {
      for (int r = 0; r < options.random_kernels; ++r) {
        const double m = spec.kernel.m_lo + picker.uniform() * (spec.kernel.m_hi - spec.kernel.m_lo);
        const double value = op.integrand(fields.rho_plus, a.regime, a.x, KernelMember::gaussian(m));
        a.kernel_violation = std::max(a.kernel_violation, value - a.rho);
      }
      const bool intervene = fields.m_star(k, col) > fields.rho_plus(k, col);
      const double at_rstar =
          intervene ? op.integrand(fields.rho_plus, a.regime, a.x, KernelMember::gaussian(fields.argmax_m(k, col)))
                    : dirac;
      a.rstar_gap = std::abs(a.rho - at_rstar);
    }

    // First-impulse inequality over random stopping rules, equality at T*.
    const RuleParameters rules[] = {
        {StoppingRule::FixedTime, std::max(1L, std::lround((0.5 + 2.5 * picker.uniform()) / grid.dt)), 0.0},
        {StoppingRule::UpperThreshold, 0, 0.2 + 0.8 * picker.uniform()},
        {StoppingRule::Band, 0, 0.2 + 0.8 * picker.uniform()},
    };
    a.stopping_violation = -kInf;
    double worst_excess = -kInf;
    for (const auto& rule : rules) {
      const auto est = chain_estimate(op, fields, in_impulse[a.regime], cumulative, a.regime, k, rule,
                                      options.n_paths, max_steps, options.seed, stream);
      stream += options.n_paths;
      const double violation = est.mean - a.rho_plus;
      if (violation - 3.0 * est.std_error > worst_excess) {
        worst_excess = violation - 3.0 * est.std_error;
        a.stopping_violation = violation;
        a.stopping_stderr = est.std_error;
      }
    }
    const auto tstar = chain_estimate(op, fields, in_impulse[a.regime], cumulative, a.regime, k,
                                      {StoppingRule::HittingTime, 0, 0.0}, options.n_paths, max_steps, options.seed,
                                      stream);
    stream += options.n_paths;
    a.tstar_gap = std::abs(tstar.mean - a.rho_plus);
    a.tstar_stderr = tstar.std_error;

    report.max_kernel_violation = std::max(report.max_kernel_violation, a.kernel_violation);
    report.max_rstar_gap = std::max(report.max_rstar_gap, a.rstar_gap);
    report.max_stopping_excess = std::max(report.max_stopping_excess, worst_excess);
    report.max_tstar_excess = std::max(report.max_tstar_excess, a.tstar_gap - 3.0 * a.tstar_stderr);
    report.states.push_back(a);
  }
  return report;
}

}  // namespace impulse
