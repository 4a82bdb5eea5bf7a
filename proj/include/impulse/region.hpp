#pragma once

#include <algorithm>
#include <vector>

#include "impulse/grid.hpp"
#include "impulse/model.hpp"

namespace impulse {

/// Closed interval of grid points [lo, hi].
struct Interval {
  double lo;
  double hi;

  bool contains(double x) const { return lo <= x && x <= hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Impulse set I and continuation set C per regime, as maximal closed runs of
/// grid points. Queries off the grid use the end label (constant extension).
struct Region {
  Grid grid;
  double epsilon = 0.0;
  std::vector<std::vector<Interval>> impulse;
  std::vector<std::vector<Interval>> continuation;

  bool in_impulse(RegimeId i, double x) const {
    const double clamped = std::clamp(x, grid.x_lo, grid.x_hi);
    const auto& runs = impulse[i];
    auto it = std::upper_bound(runs.begin(), runs.end(), clamped,
                               [](double v, const Interval& iv) { return v < iv.lo; });
    if (it == runs.begin()) return false;
    return std::prev(it)->contains(clamped);
  }

  bool in_continuation(RegimeId i, double x) const { return !in_impulse(i, x); }

  bool impulse_empty() const {
    return std::all_of(impulse.begin(), impulse.end(), [](const auto& v) { return v.empty(); });
  }
};

}  // namespace impulse
