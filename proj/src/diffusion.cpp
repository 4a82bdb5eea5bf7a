#include "impulse/diffusion.hpp"

#include <cmath>
#include <string>

namespace impulse {

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)};
  engine_.seed(seq);
}

double euler_step(const ProblemSpec& spec, RegimeId i, double x, double dt, double z) {
  return x + drift(spec, i, x) * dt + volatility(spec, i, x) * std::sqrt(dt) * z;
}

double discount_weight(double beta, double dt) { return -std::expm1(-beta * dt) / beta; }

PathSegment simulate_segment(const ProblemSpec& spec, RegimeId i, double x, const SegmentStop& stop,
                             double global_t0, const SegmentOptions& options, RngStream& rng) {
  const double dt = options.dt;
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be > 0");

  PathSegment seg;
  seg.regime = i;
  seg.start_x = x;
  seg.start_time = global_t0;
  if (options.record) {
    seg.times.push_back(global_t0);
    seg.values.push_back(x);
  }

  const double full_step_decay = std::exp(-spec.beta * dt);
  const double reach_slack = 1e-9 * dt;
  double y = x;
  double t = global_t0;
  double discount = std::exp(-spec.beta * global_t0);
  double weighted_prev = discount * eval_profit(spec, i, y);
  std::size_t k = 0;

  for (;;) {
    const double remaining = stop.until - t;
    if (remaining <= reach_slack) {
      seg.exit = SegmentExit::HorizonReached;
      break;
    }
    const bool full = remaining >= dt - reach_slack;
    const double h = full ? dt : remaining;
    const double next = euler_step(spec, i, y, h, rng.normal());
    if (!std::isfinite(next) || std::abs(next) > options.escape_bound) {
      throw Error(ErrorCode::GridEscape, "path left |y| <= " + std::to_string(options.escape_bound) +
                                             " at t = " + std::to_string(t));
    }
    ++k;
    if (full) {
      t = global_t0 + static_cast<double>(k) * dt;
      discount *= full_step_decay;
    } else {
      t = stop.until;
      discount = std::exp(-spec.beta * t);
    }
    const double weighted = discount * eval_profit(spec, i, next);
    seg.discounted_profit += 0.5 * h * (weighted_prev + weighted);
    weighted_prev = weighted;
    seg.pre_exit_x = y;
    y = next;
    if (options.record) {
      seg.times.push_back(t);
      seg.values.push_back(y);
    }
    if (stop.region != nullptr && stop.region->in_impulse(i, y)) {
      seg.exit = SegmentExit::RegionHit;
      break;
    }
  }
  seg.end_time = t;
  seg.end_x = y;
  seg.steps = k;
  if (k == 0) seg.pre_exit_x = x;
  return seg;
}

}  // namespace impulse
