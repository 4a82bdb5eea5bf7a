#pragma once

#include <limits>
#include <optional>

#include <Eigen/Dense>

#include "impulse/grid.hpp"
#include "impulse/model.hpp"
#include "impulse/quadrature.hpp"
#include "impulse/region.hpp"

namespace impulse {

/// Sampled field, one column per regime (n_points x |U|).
using Field = Eigen::ArrayXXd;

/// Value of an empty intervention section. Compared against, never summed.
inline constexpr double kNoIntervention = -std::numeric_limits<double>::infinity();

struct SolverOptions {
  double tol = 1e-7;
  int max_iter = 20000;
  int diffusion_nodes = 20;  // Gauss-Hermite nodes for the one-step Euler law
  int jump_nodes = 20;       // Gauss-Hermite nodes for the jump kernel
  int m_scan_points = 33;
  double m_tolerance = 1e-6;
  std::optional<Interpolation> interpolation;  // default: by profit form
};

/// LogLinear for the exponential profit, Linear otherwise.
Interpolation default_interpolation(const ProblemSpec& spec);

struct ValueFields {
  Grid grid;
  Field rho_plus;
  Field m_star;
  Field rho;       // max(rho_plus, m_star), exactly
  Field argmax_m;  // optimal jump mean; m_lo where intervention is unavailable
  Eigen::ArrayXXi argmax_j;  // most likely target regime, -1 if none
  int iterations = 0;
  double residual = 0.0;
  double tol = 0.0;
  Interpolation interpolation = Interpolation::Linear;

  Eigen::Index regimes() const { return rho_plus.cols(); }
};

/// One member of the kernel family: the Dirac mass or a Gaussian shift m.
struct KernelMember {
  bool dirac = false;
  double m = 0.0;

  static KernelMember dirac_mass() { return {true, 0.0}; }
  static KernelMember gaussian(double m) { return {false, m}; }
};

struct InterventionValue {
  double value = kNoIntervention;
  double best_m = 0.0;
  std::optional<RegimeId> best_j;
};

struct InterventionFields {
  Field m_star;
  Field argmax_m;
  Eigen::ArrayXXi argmax_j;
};

/// Precomputed quadrature and the one-step Euler brackets shared by the
/// sweeps of one (spec, grid, options) triple.
class BellmanOperator {
 public:
  BellmanOperator(const ProblemSpec& spec, const Grid& grid, const SolverOptions& options);

  const ProblemSpec& spec() const { return spec_; }
  const Grid& grid() const { return grid_; }
  const SolverOptions& options() const { return options_; }
  Interpolation interpolation() const { return interpolation_; }
  const QuadratureRule<double>& diffusion_rule() const { return diffusion_rule_; }
  const QuadratureRule<double>& jump_rule() const { return jump_rule_; }
  const Field& running_profit() const { return running_profit_; }
  double decay() const { return decay_; }
  const Bracket& euler_bracket(RegimeId i, Eigen::Index k, Eigen::Index node) const {
    return brackets_[i][static_cast<std::size_t>(k * diffusion_rule_.size() + node)];
  }

  /// f(i, x_k) w(dt) + exp(-beta dt) E[value(i, Euler step from x_k)]
  Field apply(const Field& value) const;

  /// Sum_j p_ij E[-c(i,x,j,Y) + phi(j,Y)], Y ~ N(x + m, s^2); the Dirac member
  /// gives -c(i,x,i,x) + phi(i,x).
  double integrand(const Field& phi, RegimeId i, double x, const KernelMember& member) const;

  /// Best Gaussian member: 33-point scan then golden section around the best
  /// scan point; ties go to the smallest m.
  InterventionValue intervention(const Field& phi, RegimeId i, double x) const;

  InterventionFields intervention_fields(const Field& phi) const;

 private:
  const ProblemSpec& spec_;
  Grid grid_;
  SolverOptions options_;
  Interpolation interpolation_;
  QuadratureRule<double> diffusion_rule_;
  QuadratureRule<double> jump_rule_;
  Field running_profit_;  // f(i, x_k) w(dt)
  double decay_;
  // Euler-step targets, [regime][point * nodes + node]
  std::vector<std::vector<Bracket>> brackets_;
  std::vector<std::vector<double>> targets_;
};

/// Value of never intervening, by fixed-point iteration from zero.
Field no_impulse_value(const ProblemSpec& spec, const Grid& grid, const SolverOptions& options = {});

InterventionValue intervention_value(const Field& phi, const ProblemSpec& spec, const Grid& grid, RegimeId i,
                                     double x, const SolverOptions& options = {});

/// New rho_plus from the current (rho_plus, m_star) pair.
Field bellman_sweep(const ValueFields& fields, const ProblemSpec& spec, const SolverOptions& options = {});

ValueFields solve(const ProblemSpec& spec, const Grid& grid, const SolverOptions& options = {});

Region extract_regions(const ValueFields& fields, double epsilon);

/// Maximal runs of true flags as closed [x_a, x_b] intervals.
std::vector<Interval> runs_to_intervals(const Grid& grid, const std::vector<bool>& flags);

struct ComplementarityResidual {
  double max_abs_min = 0.0;      // max |min(rho - T rho, rho - m*)|
  double min_continuation = 0.0;  // min (rho - T rho)
  double min_intervention = 0.0;  // min (rho - m*), +inf when never available
};

ComplementarityResidual complementarity(const ValueFields& fields, const ProblemSpec& spec,
                                        const SolverOptions& options = {});

/// Per-check outcome of the structural invariants of a solve.
struct StructureReport {
  bool rho_is_max = true;
  double dominance_gap = 0.0;  // max(no_impulse - tol - rho_plus, 0)
  bool rho_plus_positive = true;
  ComplementarityResidual complementarity;
  double complementarity_tol = 0.0;
  bool partition_ok = true;
  double dirac_gap = 0.0;  // max |integrand(Dirac) - rho_plus| at grid points

  bool ok() const;
};

StructureReport check_structure(const ValueFields& fields, const Field& no_impulse, const Region& region,
                                const ProblemSpec& spec, const SolverOptions& options = {});

}  // namespace impulse
