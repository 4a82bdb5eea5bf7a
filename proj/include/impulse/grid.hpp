#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "impulse/error.hpp"

namespace impulse {

/// Uniform truncation of the state line plus the Bellman time step.
struct Grid {
  double x_lo = -5.0;
  double x_hi = 5.0;
  int n_points = 201;
  double dt = 0.01;

  double spacing() const { return (x_hi - x_lo) / (n_points - 1); }
  double x(Eigen::Index k) const { return x_lo + static_cast<double>(k) * spacing(); }
  Eigen::ArrayXd points() const { return Eigen::ArrayXd::LinSpaced(n_points, x_lo, x_hi); }

  void check() const {
    if (!(x_lo < x_hi) || n_points < 3 || !(dt > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "grid needs x_lo < x_hi, n_points >= 3, dt > 0");
    }
  }

  Eigen::Index nearest(double x) const {
    const double t = std::round((x - x_lo) / spacing());
    return static_cast<Eigen::Index>(std::clamp(t, 0.0, static_cast<double>(n_points - 1)));
  }
};

/// Off-grid evaluation of a sampled field.
///   Linear:    piecewise linear, constant beyond the grid.
///   LogLinear: piecewise linear in log v, extended linearly in log v beyond
///              the grid. Exact for exponentials; falls back to Linear when a
///              bracketing value is not positive.
enum class Interpolation { Linear, LogLinear };

/// Bracketing cell and weight of the right node; beyond the grid the weight is
/// clamped to the end node.
struct Bracket {
  Eigen::Index left;
  double weight;  // weight on left + 1
};

inline Bracket bracket(const Grid& grid, double x) {
  const double t = (x - grid.x_lo) / grid.spacing();
  const Eigen::Index last = grid.n_points - 1;
  if (!(t > 0.0)) return {0, 0.0};
  if (t >= static_cast<double>(last)) return {last - 1, 1.0};
  const auto k = static_cast<Eigen::Index>(t);
  return {k, t - static_cast<double>(k)};
}

template <typename Derived>
typename Derived::Scalar interpolate(const Eigen::DenseBase<Derived>& values, const Grid& grid,
                                     typename Derived::Scalar x, Interpolation mode = Interpolation::Linear) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index last = grid.n_points - 1;
  if (mode == Interpolation::LogLinear) {
    const double t = (x - grid.x_lo) / grid.spacing();
    Eigen::Index k;
    if (t <= 0.0) {
      k = 0;
    } else if (t >= static_cast<double>(last)) {
      k = last - 1;
    } else {
      k = static_cast<Eigen::Index>(t);
    }
    const Scalar a = values[k];
    const Scalar b = values[k + 1];
    if (a > Scalar(0) && b > Scalar(0)) {
      const Scalar u = t - static_cast<double>(k);
      return std::exp((Scalar(1) - u) * std::log(a) + u * std::log(b));
    }
  }
  const Bracket br = bracket(grid, x);
  return (Scalar(1) - br.weight) * values[br.left] + br.weight * values[br.left + 1];
}

}  // namespace impulse
