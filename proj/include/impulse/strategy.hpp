#pragma once

#include <memory>
#include <variant>
#include <vector>

#include "impulse/diffusion.hpp"
#include "impulse/model.hpp"
#include "impulse/qvi_solver.hpp"
#include "impulse/region.hpp"

namespace impulse {

struct State {
  RegimeId regime = 0;
  double x = 0.0;

  friend bool operator==(const State&, const State&) = default;
};

/// Never intervene.
struct NoImpulse {};

/// Intervene at t0, 2 t0, ... with jump mean m; the target regime is drawn
/// from the switch-matrix row of the current regime.
struct FixedCadence {
  double t0 = 1.0;
  double m = 0.0;
  bool dirac = false;  // apply the Dirac member (state unchanged, zero cost)
};

/// Intervene on each grid-time visit to the impulse set, using the solved
/// argmax kernel at the nearest grid point. m_offset perturbs the jump mean
/// (clamped to the box) for dominance tests.
struct OptimalHitting {
  std::shared_ptr<const Region> region;
  std::shared_ptr<const ValueFields> fields;
  double m_offset = 0.0;
};

struct Strategy {
  std::variant<NoImpulse, FixedCadence, OptimalHitting> rule;
  int max_impulses = 64;
};

Strategy make_optimal_hitting(std::shared_ptr<const ValueFields> fields, double epsilon, int max_impulses = 64);

struct ContinueUntilTime {
  double t;
};
struct ContinueUntilRegion {
  const Region* region;
  double horizon;
};
struct ImpulseNow {
  RegimeId target;
  double m;
  double jump_std;
  bool dirac = false;
};

using Action = std::variant<ContinueUntilTime, ContinueUntilRegion, ImpulseNow>;

/// Decision at absolute time `elapsed` for `state`. The rng is consumed only
/// when the switch-matrix row leaves the target regime random.
Action next_action(const Strategy& strategy, const State& state, double elapsed, double horizon,
                   const ProblemSpec& spec, RngStream& rng);

/// Dirac member: state unchanged.
State apply_dirac(const State& state);

/// y = x + m + s z with z drawn from rng. Throws UnreachableRegime when
/// p[i][j] = 0.
State apply_impulse(const State& state, RegimeId j, double m, const ProblemSpec& spec, RngStream& rng);

struct ImpulseRecord {
  double tau = 0.0;
  State from;
  State to;
  double discounted_cost = 0.0;
};

enum class StopReason { HorizonReached, ImpulseCapHit, AbsorbedInContinuation };

std::string_view to_string(StopReason reason);

struct StrategyTrace {
  std::vector<ImpulseRecord> impulses;
  double total_profit = 0.0;
  double total_cost = 0.0;
  double gain = 0.0;
  StopReason stopped_reason = StopReason::HorizonReached;
  State final_state;
  double end_time = 0.0;
  /// Recorded path, filled when EpisodeOptions::record_path is set.
  std::vector<double> path_times;
  std::vector<RegimeId> path_regimes;
  std::vector<double> path_values;
  std::vector<double> path_profit;
};

struct EpisodeOptions {
  double horizon = 30.0;
  double dt = 0.01;
  double escape_bound = 1e6;
  bool record_path = false;
};

/// Alternates diffusion segments and impulses until the horizon. After an
/// impulse the state diffuses at least one step before the next check; after
/// max_impulses the last technology is kept to the horizon.
StrategyTrace run_episode(const Strategy& strategy, const State& start, const EpisodeOptions& options,
                          const ProblemSpec& spec, RngStream& rng);

}  // namespace impulse
