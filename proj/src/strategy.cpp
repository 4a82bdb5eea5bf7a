#include "impulse/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace impulse {

namespace {

constexpr double kTimeSlack = 1e-9;

RegimeId draw_target(const ProblemSpec& spec, RegimeId i, RngStream& rng) {
  const auto row = spec.kernel.switch_matrix.row(static_cast<Eigen::Index>(i));
  Eigen::Index best = 0;
  if (row.maxCoeff(&best) == 1.0) return static_cast<RegimeId>(best);
  const double u = rng.uniform();
  double cumulative = 0.0;
  Eigen::Index last_positive = best;
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    if (row[j] <= 0.0) continue;
    last_positive = j;
    cumulative += row[j];
    if (u < cumulative) return static_cast<RegimeId>(j);
  }
  return static_cast<RegimeId>(last_positive);
}

void check_cadence(const FixedCadence& cadence, const ProblemSpec& spec) {
  if (!(cadence.t0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "cadence t0 must be > 0");
  if (cadence.dirac) return;
  if (cadence.m < spec.kernel.m_lo || cadence.m > spec.kernel.m_hi) {
    throw Error(ErrorCode::ParameterOutOfBox, "cadence jump mean outside [m_lo, m_hi]");
  }
  if (!spec.kernel.intervention_enabled) {
    throw Error(ErrorCode::InvalidArgument, "cadence strategy needs the Gaussian kernel members");
  }
}

}  // namespace

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::HorizonReached: return "HorizonReached";
    case StopReason::ImpulseCapHit: return "ImpulseCapHit";
    case StopReason::AbsorbedInContinuation: return "AbsorbedInContinuation";
  }
  return "Unknown";
}

Strategy make_optimal_hitting(std::shared_ptr<const ValueFields> fields, double epsilon, int max_impulses) {
  auto region = std::make_shared<const Region>(extract_regions(*fields, epsilon));
  return Strategy{OptimalHitting{std::move(region), std::move(fields), 0.0}, max_impulses};
}

Action next_action(const Strategy& strategy, const State& state, double elapsed, double horizon,
                   const ProblemSpec& spec, RngStream& rng) {
  if (!std::isfinite(state.x)) throw Error(ErrorCode::StateOutOfGrid, "non-finite state");

  if (std::holds_alternative<NoImpulse>(strategy.rule)) return ContinueUntilTime{horizon};

  if (const auto* cadence = std::get_if<FixedCadence>(&strategy.rule)) {
    check_cadence(*cadence, spec);
    const double cycles = elapsed / cadence->t0;
    const double nearest = std::round(cycles);
    if (elapsed > 0.0 && std::abs(cycles - nearest) <= kTimeSlack * std::max(1.0, cycles)) {
      if (cadence->dirac) return ImpulseNow{state.regime, 0.0, 0.0, true};
      return ImpulseNow{draw_target(spec, state.regime, rng), cadence->m, spec.kernel.jump_std};
    }
    const double next = (std::floor(cycles + kTimeSlack) + 1.0) * cadence->t0;
    return ContinueUntilTime{std::min(next, horizon)};
  }

  const auto& hitting = std::get<OptimalHitting>(strategy.rule);
  const auto& region = *hitting.region;
  if (region.in_continuation(state.regime, state.x)) return ContinueUntilRegion{&region, horizon};

  const auto& fields = *hitting.fields;
  const auto k = fields.grid.nearest(state.x);
  const auto i = static_cast<Eigen::Index>(state.regime);
  const double m = std::clamp(fields.argmax_m(k, i) + hitting.m_offset, spec.kernel.m_lo, spec.kernel.m_hi);
  const int j = fields.argmax_j(k, i);
  const auto row = spec.kernel.switch_matrix.row(i);
  const RegimeId target =
      (j >= 0 && row[j] == 1.0) ? static_cast<RegimeId>(j) : draw_target(spec, state.regime, rng);
  return ImpulseNow{target, m, spec.kernel.jump_std};
}

State apply_dirac(const State& state) { return state; }

State apply_impulse(const State& state, RegimeId j, double m, const ProblemSpec& spec, RngStream& rng) {
  const auto& p = spec.kernel.switch_matrix;
  if (j >= spec.regime_count || p(static_cast<Eigen::Index>(state.regime), static_cast<Eigen::Index>(j)) <= 0.0) {
    throw Error(ErrorCode::UnreachableRegime,
                "p[" + std::to_string(state.regime) + "][" + std::to_string(j) + "] = 0");
  }
  return State{j, state.x + m + spec.kernel.jump_std * rng.normal()};
}

StrategyTrace run_episode(const Strategy& strategy, const State& start, const EpisodeOptions& options,
                          const ProblemSpec& spec, RngStream& rng) {
  if (!(options.horizon > 0.0)) throw Error(ErrorCode::InvalidArgument, "horizon must be > 0");

  StrategyTrace trace;
  State state = start;
  double t = 0.0;
  bool may_impulse = true;
  bool cap_hit = false;
  bool last_waited_for_region = false;
  const double slack = kTimeSlack * options.dt;

  SegmentOptions seg_options;
  seg_options.dt = options.dt;
  seg_options.escape_bound = options.escape_bound;
  seg_options.record = options.record_path;

  if (options.record_path) {
    trace.path_times.push_back(0.0);
    trace.path_regimes.push_back(state.regime);
    trace.path_values.push_back(state.x);
    trace.path_profit.push_back(0.0);
  }

  while (t < options.horizon - slack) {
    const bool under_cap = static_cast<int>(trace.impulses.size()) < strategy.max_impulses;
    if (!under_cap) cap_hit = true;
    Action action = under_cap ? next_action(strategy, state, t, options.horizon, spec, rng)
                              : Action{ContinueUntilTime{options.horizon}};

    if (const auto* impulse = std::get_if<ImpulseNow>(&action)) {
      if (may_impulse) {
        const State to =
            impulse->dirac ? apply_dirac(state) : apply_impulse(state, impulse->target, impulse->m, spec, rng);
        const double cost = std::exp(-spec.beta * t) * eval_cost(spec, state.regime, state.x, to.regime, to.x);
        trace.impulses.push_back({t, state, to, cost});
        trace.total_cost += cost;
        state = to;
        may_impulse = false;
        if (options.record_path) {
          trace.path_times.push_back(t);
          trace.path_regimes.push_back(state.regime);
          trace.path_values.push_back(state.x);
          trace.path_profit.push_back(trace.total_profit);
        }
        continue;
      }
      // Just intervened: diffuse before the next decision.
      if (const auto* cadence = std::get_if<FixedCadence>(&strategy.rule)) {
        action = ContinueUntilTime{std::min(t + cadence->t0, options.horizon)};
      } else {
        action = ContinueUntilRegion{std::get<OptimalHitting>(strategy.rule).region.get(), options.horizon};
      }
    }

    SegmentStop stop;
    if (const auto* until = std::get_if<ContinueUntilTime>(&action)) {
      stop = {nullptr, until->t};
      last_waited_for_region = false;
    } else {
      const auto& wait = std::get<ContinueUntilRegion>(action);
      stop = {wait.region, wait.horizon};
      last_waited_for_region = true;
    }
    const PathSegment seg = simulate_segment(spec, state.regime, state.x, stop, t, seg_options, rng);
    trace.total_profit += seg.discounted_profit;
    if (options.record_path) {
      double running = trace.total_profit - seg.discounted_profit;
      for (std::size_t k = 1; k < seg.times.size(); ++k) {
        const double h = seg.times[k] - seg.times[k - 1];
        running += 0.5 * h *
                   (std::exp(-spec.beta * seg.times[k - 1]) * eval_profit(spec, state.regime, seg.values[k - 1]) +
                    std::exp(-spec.beta * seg.times[k]) * eval_profit(spec, state.regime, seg.values[k]));
        trace.path_times.push_back(seg.times[k]);
        trace.path_regimes.push_back(state.regime);
        trace.path_values.push_back(seg.values[k]);
        trace.path_profit.push_back(running);
      }
    }
    state.x = seg.end_x;
    t = seg.end_time;
    may_impulse = true;
  }

  trace.final_state = state;
  trace.end_time = t;
  trace.gain = trace.total_profit - trace.total_cost;
  if (cap_hit) {
    trace.stopped_reason = StopReason::ImpulseCapHit;
  } else if (last_waited_for_region) {
    trace.stopped_reason = StopReason::AbsorbedInContinuation;
  } else {
    trace.stopped_reason = StopReason::HorizonReached;
  }
  return trace;
}

}  // namespace impulse
