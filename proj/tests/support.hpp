#pragma once

#include <cmath>
#include <functional>
#include <numbers>

#include "impulse/model.hpp"

namespace impulse::testing {

inline Eigen::MatrixXd swap_matrix() {
  Eigen::MatrixXd p(2, 2);
  p << 0, 1, 1, 0;
  return p;
}

/// Arctan profit, inverse-quadratic cost, Gaussian swap kernel, m in [-1, 1].
inline ProblemSpec arctan_swap(double beta = 0.5) {
  ProblemSpec s;
  s.regime_count = 2;
  s.dynamics.drift = {{0.1, 0.0}, {0.15, 0.0}};
  s.dynamics.volatility = {{0.2, 0.0}, {0.3, 0.0}};
  s.profit.form = ProfitSpec::Form::Arctan;
  s.cost.form = CostSpec::Form::InverseQuadratic;
  s.beta = beta;
  s.kernel.switch_matrix = swap_matrix();
  s.kernel.m_lo = -1.0;
  s.kernel.m_hi = 1.0;
  s.kernel.jump_std = 1.0;
  return s;
}

inline ProblemSpec exp_no_impulse(double beta = 0.5) {
  ProblemSpec s = arctan_swap(beta);
  s.profit.form = ProfitSpec::Form::ExpScaled;
  s.profit.eta = 1.0;
  s.kernel.intervention_enabled = false;
  return s;
}

/// Single regime, constant coefficients, no intervention.
inline ProblemSpec single(double b, double sigma, ProfitSpec::Form form, double beta = 0.5) {
  ProblemSpec s;
  s.regime_count = 1;
  s.dynamics.drift = {{b, 0.0}};
  s.dynamics.volatility = {{sigma, 0.0}};
  s.profit.form = form;
  s.beta = beta;
  s.kernel.switch_matrix = Eigen::MatrixXd::Zero(1, 1);
  s.kernel.intervention_enabled = false;
  return s;
}

/// f = 0 everywhere: an arctan profit with offset pi/2 shifted down is not
/// zero, so zero profit is expressed as ExpScaled with eta = 0.
inline ProblemSpec zero_profit(ProblemSpec s) {
  s.profit.form = ProfitSpec::Form::ExpScaled;
  s.profit.eta = 0.0;
  return s;
}

/// Composite Simpson on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double sum = f(a) + f(b);
  for (int k = 1; k < n; ++k) sum += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
  return sum * h / 3.0;
}

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

/// E[g(Z)], Z ~ N(0,1), by Simpson on [-12, 12].
inline double normal_expectation(const std::function<double(double)>& g) {
  return simpson([&](double z) { return g(z) * normal_pdf(z); }, -12.0, 12.0);
}

/// E[1 - 1/(1 + Z^2)] in closed form: 1 - sqrt(pi/2) e^{1/2} erfc(1/sqrt 2).
inline double inverse_quadratic_mean() {
  return 1.0 - std::sqrt(std::numbers::pi / 2.0) * std::exp(0.5) * std::erfc(1.0 / std::sqrt(2.0));
}

/// Closed-form value of never intervening with f = exp(x), constant b, sigma.
inline double exp_value(double x, double b, double sigma, double beta) {
  return std::exp(x) / (beta - b - 0.5 * sigma * sigma);
}

}  // namespace impulse::testing
