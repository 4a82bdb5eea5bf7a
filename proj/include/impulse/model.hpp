#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "impulse/error.hpp"

namespace impulse {

/// Index into the finite technology set.
using RegimeId = std::size_t;

/// b(i,x) = intercept + slope * x, and likewise for sigma.
struct AffineCoefficient {
  double intercept = 0.0;
  double slope = 0.0;

  double operator()(double x) const { return intercept + slope * x; }
  bool is_constant() const { return slope == 0.0; }
};

struct DynamicsSpec {
  std::vector<AffineCoefficient> drift;
  std::vector<AffineCoefficient> volatility;
  /// Declared Lipschitz / linear-growth constant. When absent the smallest
  /// constant satisfying both conditions is used.
  std::optional<double> lipschitz_k;
};

struct ProfitSpec {
  enum class Form { Arctan, ExpScaled };

  Form form = Form::Arctan;
  double offset = std::numbers::pi / 2.0;  // Arctan: f = atan(x) + offset
  double eta = 1.0;                        // ExpScaled: f = eta * exp(x)

  bool bounded() const { return form == Form::Arctan; }
  /// sup f, +inf for the exponential form.
  double sup() const;
};

struct CostSpec {
  enum class Form { InverseQuadratic, ExpMu, Constant };

  Form form = Form::InverseQuadratic;
  double mu = 0.0;     // ExpMu: c = exp(x + mu (y - x))
  double level = 0.0;  // Constant: c = level off the diagonal

  bool bounded() const { return form != Form::ExpMu; }
  double sup() const;
};

/// Gaussian mean-shift family p (x) N(x + m, s^2), m in [m_lo, m_hi], plus the
/// Dirac mass at the current state which is always a member.
struct KernelFamily {
  Eigen::MatrixXd switch_matrix;
  double m_lo = 0.0;
  double m_hi = 0.0;
  double jump_std = 1.0;
  /// False leaves only the Dirac member; intervention is then never useful.
  bool intervention_enabled = true;
};

struct ProblemSpec {
  std::size_t regime_count = 1;
  DynamicsSpec dynamics;
  ProfitSpec profit;
  CostSpec cost;
  double beta = 0.5;
  KernelFamily kernel;
};

struct Violation {
  ErrorCode code;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(ErrorCode code) const;
  std::string describe() const;
};

/// Interval of the state space on which volatility positivity is checked.
/// Without one the check covers the whole line.
struct Domain {
  double lo;
  double hi;
};

ValidationReport validate_spec(const ProblemSpec& spec, std::optional<Domain> domain = std::nullopt);

/// Throws Error with the first violated condition's code and the full report.
void require_valid(const ProblemSpec& spec, std::optional<Domain> domain = std::nullopt);

/// Smallest K for which the Lipschitz and linear-growth conditions hold on
/// every regime's affine coefficients.
double minimal_lipschitz_constant(const DynamicsSpec& dynamics);

/// max_i (b_i + sigma_i^2 / 2) for constant coefficients; the ExpScaled
/// integrability margin is beta minus this.
double max_exponential_growth(const ProblemSpec& spec);

inline double drift(const ProblemSpec& spec, RegimeId i, double x) { return spec.dynamics.drift[i](x); }
inline double volatility(const ProblemSpec& spec, RegimeId i, double x) {
  return spec.dynamics.volatility[i](x);
}

bool has_constant_coefficients(const ProblemSpec& spec);

double eval_profit(const ProblemSpec& spec, RegimeId i, double x);
double eval_cost(const ProblemSpec& spec, RegimeId i, double x, RegimeId j, double y);

/// y -> p[i][j] * phi((y - x - m) / s) / s
struct JumpDensity {
  double weight;
  double mean;
  double std;

  double operator()(double y) const {
    const double z = (y - mean) / std;
    return weight * std::exp(-0.5 * z * z) / (std * std::sqrt(2.0 * std::numbers::pi));
  }
};

JumpDensity kernel_density(const ProblemSpec& spec, double m, RegimeId i, double x, RegimeId j);

}  // namespace impulse
