#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "impulse/model.hpp"
#include "impulse/region.hpp"

namespace impulse {

/// Independent normal stream keyed by (seed, stream_id). The same key always
/// reproduces the same draws, so path p of every estimate uses stream p.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// x + b(i,x) dt + sigma(i,x) sqrt(dt) z
double euler_step(const ProblemSpec& spec, RegimeId i, double x, double dt, double z);

/// (1 - exp(-beta dt)) / beta
double discount_weight(double beta, double dt);

/// Where a segment ends: the first grid time at which the state lies in the
/// region's impulse set, or the absolute time `until`, whichever is first.
struct SegmentStop {
  const Region* region = nullptr;
  double until = 0.0;
};

enum class SegmentExit { RegionHit, HorizonReached };

struct SegmentOptions {
  double dt = 0.01;
  double escape_bound = 1e6;  // |Y| beyond this raises GridEscape
  bool record = false;        // keep the sampled path
};

struct PathSegment {
  RegimeId regime = 0;
  double start_x = 0.0;
  double start_time = 0.0;
  std::vector<double> times;   // absolute times, start included; only when recorded
  std::vector<double> values;
  /// Trapezoid rule for the integral of exp(-beta s) f(i, Y_s) over the
  /// segment, discounting from absolute time zero.
  double discounted_profit = 0.0;
  SegmentExit exit = SegmentExit::HorizonReached;
  double end_time = 0.0;
  double end_x = 0.0;
  double pre_exit_x = 0.0;  // state one step before the exit
  std::size_t steps = 0;
};

PathSegment simulate_segment(const ProblemSpec& spec, RegimeId i, double x, const SegmentStop& stop,
                             double global_t0, const SegmentOptions& options, RngStream& rng);

}  // namespace impulse
