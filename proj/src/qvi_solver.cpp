#include "impulse/qvi_solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "impulse/diffusion.hpp"
#include "impulse/parallel.hpp"

namespace impulse {

namespace {

constexpr double kInvGolden = 0.6180339887498949;

double sup_norm_change(const Field& a, const Field& b) { return (a - b).abs().maxCoeff(); }

Field pointwise_max(const Field& rho_plus, const Field& m_star) { return rho_plus.max(m_star); }

}  // namespace

Interpolation default_interpolation(const ProblemSpec& spec) {
  return spec.profit.form == ProfitSpec::Form::ExpScaled ? Interpolation::LogLinear : Interpolation::Linear;
}

BellmanOperator::BellmanOperator(const ProblemSpec& spec, const Grid& grid, const SolverOptions& options)
    : spec_(spec),
      grid_(grid),
      options_(options),
      interpolation_(options.interpolation.value_or(default_interpolation(spec))),
      diffusion_rule_(gauss_hermite_normal<double>(options.diffusion_nodes)),
      jump_rule_(gauss_hermite_normal<double>(options.jump_nodes)),
      decay_(std::exp(-spec.beta * grid.dt)) {
  grid_.check();
  require_valid(spec, Domain{grid_.x_lo, grid_.x_hi});
  const auto n = grid_.n_points;
  const auto regimes = static_cast<Eigen::Index>(spec.regime_count);
  const double w = discount_weight(spec.beta, grid_.dt);
  running_profit_.resize(n, regimes);
  brackets_.assign(spec.regime_count, {});
  targets_.assign(spec.regime_count, {});
  const auto nodes = diffusion_rule_.size();
  for (Eigen::Index i = 0; i < regimes; ++i) {
    auto& br = brackets_[i];
    auto& tg = targets_[i];
    br.reserve(n * nodes);
    tg.reserve(n * nodes);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double x = grid_.x(k);
      running_profit_(k, i) = eval_profit(spec, i, x) * w;
      for (Eigen::Index q = 0; q < nodes; ++q) {
        const double y = euler_step(spec, i, x, grid_.dt, diffusion_rule_.nodes[q]);
        tg.push_back(y);
        br.push_back(bracket(grid_, y));
      }
    }
  }
}

Field BellmanOperator::apply(const Field& value) const {
  const auto n = grid_.n_points;
  const auto nodes = diffusion_rule_.size();
  Field out(n, value.cols());
  const auto& weights = diffusion_rule_.weights;
  for (Eigen::Index i = 0; i < value.cols(); ++i) {
    const auto column = value.col(i);
    const auto& br = brackets_[i];
    const auto& tg = targets_[i];
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t kk) {
      const auto k = static_cast<Eigen::Index>(kk);
      double expectation = 0.0;
      for (Eigen::Index q = 0; q < nodes; ++q) {
        const auto idx = static_cast<std::size_t>(k * nodes + q);
        double v;
        if (interpolation_ == Interpolation::Linear) {
          const Bracket& b = br[idx];
          v = (1.0 - b.weight) * column[b.left] + b.weight * column[b.left + 1];
        } else {
          v = interpolate(column, grid_, tg[idx], interpolation_);
        }
        expectation += weights[q] * v;
      }
      out(k, i) = running_profit_(k, i) + decay_ * expectation;
    });
  }
  return out;
}

double BellmanOperator::integrand(const Field& phi, RegimeId i, double x, const KernelMember& member) const {
  if (member.dirac) return -eval_cost(spec_, i, x, i, x) + interpolate(phi.col(i), grid_, x, interpolation_);
  const auto& p = spec_.kernel.switch_matrix;
  const double s = spec_.kernel.jump_std;
  double total = 0.0;
  for (RegimeId j = 0; j < spec_.regime_count; ++j) {
    const double pij = p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    if (pij <= 0.0) continue;
    const auto column = phi.col(static_cast<Eigen::Index>(j));
    double expectation = 0.0;
    for (Eigen::Index q = 0; q < jump_rule_.size(); ++q) {
      const double y = x + member.m + s * jump_rule_.nodes[q];
      expectation += jump_rule_.weights[q] * (-eval_cost(spec_, i, x, j, y) + interpolate(column, grid_, y, interpolation_));
    }
    total += pij * expectation;
  }
  return total;
}

InterventionValue BellmanOperator::intervention(const Field& phi, RegimeId i, double x) const {
  const auto& kernel = spec_.kernel;
  InterventionValue result;
  result.best_m = kernel.m_lo;
  if (!kernel.intervention_enabled) return result;

  const auto& p = kernel.switch_matrix;
  const auto row = p.row(static_cast<Eigen::Index>(i));
  Eigen::Index target = 0;
  row.maxCoeff(&target);
  result.best_j = static_cast<RegimeId>(target);

  auto value_at = [&](double m) { return integrand(phi, i, x, KernelMember::gaussian(m)); };

  const double lo = kernel.m_lo;
  const double hi = kernel.m_hi;
  if (hi <= lo) {
    result.value = value_at(lo);
    result.best_m = lo;
    return result;
  }

  const int scan = std::max(options_.m_scan_points, 2);
  const double step = (hi - lo) / (scan - 1);
  int best = 0;
  double best_value = value_at(lo);
  for (int s = 1; s < scan; ++s) {
    const double v = value_at(lo + s * step);
    if (v > best_value) {
      best_value = v;
      best = s;
    }
  }
  double best_m = lo + best * step;

  // Golden section on the two cells around the best scan point.
  double a = std::max(lo, best_m - step);
  double b = std::min(hi, best_m + step);
  double c = b - kInvGolden * (b - a);
  double d = a + kInvGolden * (b - a);
  double fc = value_at(c);
  double fd = value_at(d);
  while (b - a > options_.m_tolerance) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvGolden * (b - a);
      fc = value_at(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvGolden * (b - a);
      fd = value_at(d);
    }
  }
  const double refined_m = fc >= fd ? c : d;
  const double refined = std::max(fc, fd);
  if (refined > best_value) {
    best_value = refined;
    best_m = refined_m;
  }
  result.value = best_value;
  result.best_m = best_m;
  return result;
}

InterventionFields BellmanOperator::intervention_fields(const Field& phi) const {
  const auto n = grid_.n_points;
  const auto regimes = phi.cols();
  InterventionFields out;
  out.m_star.setConstant(n, regimes, kNoIntervention);
  out.argmax_m.setConstant(n, regimes, spec_.kernel.m_lo);
  out.argmax_j.setConstant(n, regimes, -1);
  if (!spec_.kernel.intervention_enabled) return out;
  parallel_for(static_cast<std::size_t>(n * regimes), [&](std::size_t idx) {
    const auto i = static_cast<Eigen::Index>(idx) / n;
    const auto k = static_cast<Eigen::Index>(idx) % n;
    const auto iv = intervention(phi, static_cast<RegimeId>(i), grid_.x(k));
    out.m_star(k, i) = iv.value;
    out.argmax_m(k, i) = iv.best_m;
    out.argmax_j(k, i) = iv.best_j ? static_cast<int>(*iv.best_j) : -1;
  });
  return out;
}

Field no_impulse_value(const ProblemSpec& spec, const Grid& grid, const SolverOptions& options) {
  const BellmanOperator op(spec, grid, options);
  Field v = Field::Zero(grid.n_points, static_cast<Eigen::Index>(spec.regime_count));
  for (int it = 0; it < options.max_iter; ++it) {
    Field next = op.apply(v);
    const double change = sup_norm_change(next, v);
    v = std::move(next);
    if (change < options.tol) return v;
  }
  throw Error(ErrorCode::NoConvergence, "no-impulse iteration did not reach tol in " +
                                            std::to_string(options.max_iter) + " sweeps");
}

InterventionValue intervention_value(const Field& phi, const ProblemSpec& spec, const Grid& grid, RegimeId i,
                                     double x, const SolverOptions& options) {
  const BellmanOperator op(spec, grid, options);
  return op.intervention(phi, i, x);
}

Field bellman_sweep(const ValueFields& fields, const ProblemSpec& spec, const SolverOptions& options) {
  const BellmanOperator op(spec, fields.grid, options);
  return op.apply(pointwise_max(fields.rho_plus, fields.m_star));
}

ValueFields solve(const ProblemSpec& spec, const Grid& grid, const SolverOptions& options) {
  const BellmanOperator op(spec, grid, options);
  ValueFields fields;
  fields.grid = grid;
  fields.tol = options.tol;
  fields.interpolation = op.interpolation();

  // Iterating from zero keeps the no-impulse sequence increasing, so its
  // limit is a sub-solution and the sweeps below are nondecreasing.
  Field v = Field::Zero(grid.n_points, static_cast<Eigen::Index>(spec.regime_count));
  double residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  while (iterations < options.max_iter && !(residual < options.tol)) {
    Field next = op.apply(v);
    residual = sup_norm_change(next, v);
    v = std::move(next);
    ++iterations;
  }

  if (spec.kernel.intervention_enabled) {
    residual = std::numeric_limits<double>::infinity();
    while (iterations < options.max_iter && !(residual < options.tol)) {
      const auto iv = op.intervention_fields(v);
      Field next = op.apply(pointwise_max(v, iv.m_star));
      residual = sup_norm_change(next, v);
      v = std::move(next);
      ++iterations;
    }
  }
  if (!(residual < options.tol)) {
    throw Error(ErrorCode::NoConvergence, "residual " + std::to_string(residual) + " above tol after " +
                                              std::to_string(iterations) + " sweeps");
  }

  auto iv = op.intervention_fields(v);
  fields.rho_plus = std::move(v);
  fields.m_star = std::move(iv.m_star);
  fields.argmax_m = std::move(iv.argmax_m);
  fields.argmax_j = std::move(iv.argmax_j);
  fields.rho = pointwise_max(fields.rho_plus, fields.m_star);
  fields.iterations = iterations;
  fields.residual = residual;
  return fields;
}

std::vector<Interval> runs_to_intervals(const Grid& grid, const std::vector<bool>& flags) {
  std::vector<Interval> out;
  const auto n = static_cast<Eigen::Index>(flags.size());
  Eigen::Index k = 0;
  while (k < n) {
    if (!flags[k]) {
      ++k;
      continue;
    }
    const Eigen::Index start = k;
    while (k + 1 < n && flags[k + 1]) ++k;
    out.push_back({grid.x(start), grid.x(k)});
    ++k;
  }
  return out;
}

Region extract_regions(const ValueFields& fields, double epsilon) {
  Region region;
  region.grid = fields.grid;
  region.epsilon = epsilon;
  const auto n = fields.grid.n_points;
  for (Eigen::Index i = 0; i < fields.regimes(); ++i) {
    std::vector<bool> impulse(n);
    std::vector<bool> continuation(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double m = fields.m_star(k, i);
      impulse[k] = m != kNoIntervention && fields.rho(k, i) - m <= epsilon;
      continuation[k] = !impulse[k];
    }
    region.impulse.push_back(runs_to_intervals(fields.grid, impulse));
    region.continuation.push_back(runs_to_intervals(fields.grid, continuation));
  }
  return region;
}

ComplementarityResidual complementarity(const ValueFields& fields, const ProblemSpec& spec,
                                        const SolverOptions& options) {
  const Field continued = bellman_sweep(fields, spec, options);
  ComplementarityResidual r;
  r.min_continuation = std::numeric_limits<double>::infinity();
  r.min_intervention = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < fields.regimes(); ++i) {
    for (Eigen::Index k = 0; k < fields.grid.n_points; ++k) {
      const double a = fields.rho(k, i) - continued(k, i);
      const double b = fields.m_star(k, i) == kNoIntervention ? std::numeric_limits<double>::infinity()
                                                              : fields.rho(k, i) - fields.m_star(k, i);
      r.max_abs_min = std::max(r.max_abs_min, std::abs(std::min(a, b)));
      r.min_continuation = std::min(r.min_continuation, a);
      r.min_intervention = std::min(r.min_intervention, b);
    }
  }
  return r;
}

bool StructureReport::ok() const {
  const double tol = complementarity_tol;
  return rho_is_max && dominance_gap == 0.0 && rho_plus_positive && complementarity.max_abs_min <= tol &&
         complementarity.min_continuation >= -tol && complementarity.min_intervention >= -tol && partition_ok &&
         dirac_gap <= 1e-12;
}

StructureReport check_structure(const ValueFields& fields, const Field& no_impulse, const Region& region,
                                const ProblemSpec& spec, const SolverOptions& options) {
  StructureReport report;
  report.rho_is_max = (fields.rho == pointwise_max(fields.rho_plus, fields.m_star)).all();
  report.dominance_gap = std::max(0.0, (no_impulse - fields.tol - fields.rho_plus).maxCoeff());
  report.rho_plus_positive = (fields.rho_plus > 0.0).all();
  report.complementarity = complementarity(fields, spec, options);
  report.complementarity_tol = 10.0 * fields.tol;

  const BellmanOperator op(spec, fields.grid, options);
  for (Eigen::Index i = 0; i < fields.regimes(); ++i) {
    for (Eigen::Index k = 0; k < fields.grid.n_points; ++k) {
      const double x = fields.grid.x(k);
      const bool in_i = std::any_of(region.impulse[i].begin(), region.impulse[i].end(),
                                    [x](const Interval& iv) { return iv.contains(x); });
      const bool in_c = std::any_of(region.continuation[i].begin(), region.continuation[i].end(),
                                    [x](const Interval& iv) { return iv.contains(x); });
      if (in_i == in_c) report.partition_ok = false;
      const double dirac = op.integrand(fields.rho_plus, static_cast<RegimeId>(i), x, KernelMember::dirac_mass());
      report.dirac_gap = std::max(report.dirac_gap, std::abs(dirac - fields.rho_plus(k, i)));
    }
  }
  return report;
}

}  // namespace impulse
