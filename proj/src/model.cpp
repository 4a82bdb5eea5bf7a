#include "impulse/model.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace impulse {

namespace {

constexpr double kRowSumTolerance = 1e-12;

// Largest eigenvalue of [[P, B], [B, Q]]: the smallest K^2 for which
// (b0 + b1 x)^2 + (s0 + s1 x)^2 <= K^2 (1 + x^2) holds for every x.
double growth_constant_squared(const AffineCoefficient& b, const AffineCoefficient& s) {
  const double p = b.slope * b.slope + s.slope * s.slope;
  const double q = b.intercept * b.intercept + s.intercept * s.intercept;
  const double cross = b.intercept * b.slope + s.intercept * s.slope;
  return 0.5 * ((p + q) + std::sqrt((p - q) * (p - q) + 4.0 * cross * cross));
}

}  // namespace

double ProfitSpec::sup() const {
  if (form == Form::Arctan) return offset + std::numbers::pi / 2.0;
  return eta == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

double CostSpec::sup() const {
  switch (form) {
    case Form::InverseQuadratic: return 1.0;
    case Form::Constant: return level;
    case Form::ExpMu: return std::numeric_limits<double>::infinity();
  }
  return std::numeric_limits<double>::infinity();
}

bool ValidationReport::has(ErrorCode code) const {
  return std::any_of(violations.begin(), violations.end(),
                     [code](const Violation& v) { return v.code == code; });
}

std::string ValidationReport::describe() const {
  std::ostringstream out;
  for (const auto& v : violations) out << to_string(v.code) << ": " << v.detail << '\n';
  return out.str();
}

double minimal_lipschitz_constant(const DynamicsSpec& dynamics) {
  double k = 0.0;
  for (std::size_t i = 0; i < dynamics.drift.size() && i < dynamics.volatility.size(); ++i) {
    const auto& b = dynamics.drift[i];
    const auto& s = dynamics.volatility[i];
    k = std::max(k, std::abs(b.slope) + std::abs(s.slope));
    k = std::max(k, std::sqrt(growth_constant_squared(b, s)));
  }
  return k;
}

bool has_constant_coefficients(const ProblemSpec& spec) {
  for (std::size_t i = 0; i < spec.regime_count; ++i) {
    if (!spec.dynamics.drift[i].is_constant() || !spec.dynamics.volatility[i].is_constant()) return false;
  }
  return true;
}

double max_exponential_growth(const ProblemSpec& spec) {
  double g = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < spec.regime_count; ++i) {
    const double b = spec.dynamics.drift[i].intercept;
    const double s = spec.dynamics.volatility[i].intercept;
    g = std::max(g, b + 0.5 * s * s);
  }
  return g;
}

ValidationReport validate_spec(const ProblemSpec& spec, std::optional<Domain> domain) {
  ValidationReport report;
  auto fail = [&report](ErrorCode code, std::string detail) {
    report.violations.push_back({code, std::move(detail)});
  };

  const std::size_t n = spec.regime_count;
  if (n == 0) fail(ErrorCode::InvalidArgument, "at least one regime is required");
  if (spec.dynamics.drift.size() != n || spec.dynamics.volatility.size() != n) {
    fail(ErrorCode::InvalidArgument, "drift/volatility must be given for every regime");
    return report;
  }

  if (!(spec.beta > 0.0) || !std::isfinite(spec.beta)) {
    fail(ErrorCode::NonPositiveBeta, "beta = " + std::to_string(spec.beta) + " must be > 0");
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = spec.dynamics.volatility[i];
    bool negative = false;
    if (domain) {
      negative = std::min(s(domain->lo), s(domain->hi)) < 0.0;
    } else {
      negative = s.slope != 0.0 || s.intercept < 0.0;
    }
    if (negative) fail(ErrorCode::NegativeVolatility, "sigma(" + std::to_string(i) + ", x) < 0 on the domain");
  }

  const double k_min = minimal_lipschitz_constant(spec.dynamics);
  if (spec.dynamics.lipschitz_k && *spec.dynamics.lipschitz_k < k_min) {
    fail(ErrorCode::LipschitzViolation, "declared K = " + std::to_string(*spec.dynamics.lipschitz_k) +
                                            " below required " + std::to_string(k_min));
  }

  const auto& profit = spec.profit;
  if (profit.form == ProfitSpec::Form::Arctan && profit.offset < std::numbers::pi / 2.0) {
    fail(ErrorCode::NegativeProfit, "arctan offset must be >= pi/2 for f >= 0");
  }
  if (profit.form == ProfitSpec::Form::ExpScaled && profit.eta < 0.0) {
    fail(ErrorCode::NegativeProfit, "eta must be >= 0");
  }
  if (spec.cost.form == CostSpec::Form::Constant && spec.cost.level < 0.0) {
    fail(ErrorCode::InvalidArgument, "constant cost level must be >= 0");
  }

  if (profit.form == ProfitSpec::Form::ExpScaled && profit.eta > 0.0) {
    if (!has_constant_coefficients(spec)) {
      fail(ErrorCode::IntegrabilityViolation, "exponential profit requires constant coefficients");
    } else if (!(spec.beta - max_exponential_growth(spec) > 0.0)) {
      fail(ErrorCode::IntegrabilityViolation,
           "beta = " + std::to_string(spec.beta) + " <= max_i(b_i + sigma_i^2/2) = " +
               std::to_string(max_exponential_growth(spec)));
    }
  }

  const auto& kernel = spec.kernel;
  if (kernel.m_lo > kernel.m_hi) fail(ErrorCode::EmptyKernelBox, "m_lo > m_hi");
  if (!(kernel.jump_std > 0.0)) fail(ErrorCode::InvalidArgument, "jump_std must be > 0");
  if (kernel.intervention_enabled) {
    const auto& p = kernel.switch_matrix;
    if (p.rows() != static_cast<Eigen::Index>(n) || p.cols() != static_cast<Eigen::Index>(n)) {
      fail(ErrorCode::BadStochasticMatrix, "switch matrix must be |U| x |U|");
    } else {
      for (Eigen::Index r = 0; r < p.rows(); ++r) {
        if (std::abs(p.row(r).sum() - 1.0) > kRowSumTolerance) {
          fail(ErrorCode::BadStochasticMatrix, "row " + std::to_string(r) + " does not sum to 1");
        }
        if ((p.row(r).array() < 0.0).any()) {
          fail(ErrorCode::BadStochasticMatrix, "row " + std::to_string(r) + " has a negative entry");
        }
        if (p(r, r) != 0.0) {
          fail(ErrorCode::BadStochasticMatrix, "diagonal entry " + std::to_string(r) + " must be 0");
        }
      }
    }
  }
  return report;
}

void require_valid(const ProblemSpec& spec, std::optional<Domain> domain) {
  const auto report = validate_spec(spec, domain);
  if (!report.ok()) throw Error(report.violations.front().code, report.describe());
}

double eval_profit(const ProblemSpec& spec, RegimeId /*i*/, double x) {
  const auto& profit = spec.profit;
  if (profit.form == ProfitSpec::Form::Arctan) return std::atan(x) + profit.offset;
  return profit.eta * std::exp(x);
}

double eval_cost(const ProblemSpec& spec, RegimeId i, double x, RegimeId j, double y) {
  if (i == j && x == y) return 0.0;
  const auto& cost = spec.cost;
  switch (cost.form) {
    case CostSpec::Form::InverseQuadratic: {
      const double d = y - x;
      return 1.0 - 1.0 / (1.0 + d * d);
    }
    case CostSpec::Form::ExpMu: return std::exp(x + cost.mu * (y - x));
    case CostSpec::Form::Constant: return cost.level;
  }
  return 0.0;
}

JumpDensity kernel_density(const ProblemSpec& spec, double m, RegimeId i, double x, RegimeId j) {
  const auto& kernel = spec.kernel;
  if (m < kernel.m_lo || m > kernel.m_hi) {
    throw Error(ErrorCode::ParameterOutOfBox, "jump mean " + std::to_string(m) + " outside [m_lo, m_hi]");
  }
  return JumpDensity{kernel.switch_matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                     x + m, kernel.jump_std};
}

}  // namespace impulse
