#include "doctest.h"

#include <cmath>
#include <numbers>

#include "impulse/montecarlo.hpp"
#include "impulse/quadrature.hpp"
#include "support.hpp"

using namespace impulse;
using namespace impulse::testing;

TEST_CASE("zero profit: no impulse gains nothing, cadence loses") {
  const auto s = zero_profit(arctan_swap());
  McOptions mc;
  mc.n_paths = 200;
  mc.horizon = 5.0;
  const auto none = estimate_gain(Strategy{NoImpulse{}}, {0, 0.0}, mc, s);
  CHECK(none.mean == 0.0);
  CHECK(none.std_error == 0.0);
  const auto cadence = estimate_gain(Strategy{FixedCadence{1.0, 0.0}}, {0, 0.0}, mc, s);
  CHECK(cadence.mean < 0.0);
}

TEST_CASE("estimate_gain guards and bookkeeping") {
  const auto s = arctan_swap();
  McOptions mc;
  mc.n_paths = 1;
  CHECK_THROWS_AS(estimate_gain(Strategy{NoImpulse{}}, {0, 0.0}, mc, s), Error);

  mc.n_paths = 300;
  mc.horizon = 4.0;
  const auto g = estimate_gain(Strategy{FixedCadence{1.0, 0.2}}, {1, 0.0}, mc, s);
  CHECK(g.n_paths == 300);
  CHECK(g.horizon == 4.0);
  CHECK(g.dt == mc.dt);
  CHECK(g.tail_bound > 0.0);
  std::size_t total = 0;
  for (auto c : g.impulse_histogram) total += c;
  CHECK(total == 300);
  REQUIRE(g.impulse_histogram.size() == 4);
  CHECK(g.impulse_histogram[3] == 300);  // impulses at t = 1, 2, 3
}

TEST_CASE("stderr shrinks like one over root n") {
  const auto s = arctan_swap();
  McOptions mc;
  mc.horizon = 6.0;
  mc.n_paths = 2000;
  const auto a = estimate_gain(Strategy{NoImpulse{}}, {0, 0.0}, mc, s);
  mc.n_paths = 4000;
  const auto b = estimate_gain(Strategy{NoImpulse{}}, {0, 0.0}, mc, s);
  CHECK(b.std_error / a.std_error == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.2));
}

TEST_CASE("f_series: q, L = 0, and guards") {
  const auto s = arctan_swap();
  const auto series = f_series(s, FixedCadence{1.0, 0.3}, 0, {0, 0.0});
  CHECK(series.q == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  CHECK(series.q == doctest::Approx(0.606531).epsilon(1e-6));
  CHECK(series.partial_sum == series.f1[0]);

  // Pre-first-impulse profit: int_0^1 e^{-t/2} E[atan(b t + sigma W_t) + pi/2] dt.
  const double oracle = simpson(
      [](double t) {
        if (t == 0.0) return std::numbers::pi / 2;
        return std::exp(-0.5 * t) *
               normal_expectation([&](double z) { return std::atan(0.1 * t + 0.2 * std::sqrt(t) * z) + std::numbers::pi / 2; });
      },
      0.0, 1.0, 200);
  CHECK(series.f1[0] == doctest::Approx(oracle).epsilon(1e-9));

  auto sloped = s;
  sloped.dynamics.drift[0].slope = 0.1;
  CHECK_THROWS_AS(f_series(sloped, FixedCadence{1.0, 0.3}, 3, {0, 0.0}), Error);
  CHECK_THROWS_AS(f_series(s, FixedCadence{1.0, 3.0}, 3, {0, 0.0}), Error);
}

TEST_CASE("f_series: geometric majorants") {
  const auto s = arctan_swap();
  const auto series = f_series(s, FixedCadence{1.0, 0.3}, 12, {1, 0.5});
  for (int l = 0; l <= 12; ++l) {
    CHECK(series.f1_sup[l] <= std::numbers::pi * std::pow(series.q, l));
    CHECK(std::abs(series.f1[l]) <= series.f1_sup[l] + 1e-12);
  }
  for (int l = 1; l <= 12; ++l) CHECK(series.f3_sup[l] <= 1.0 * std::pow(series.q, l));
  CHECK_FALSE(series.tail_from_growth);
}

TEST_CASE("f_series: Gaussian closed form for exponential profit") {
  // With f = eta e^x and c = 0 every level is a closed-form Gaussian moment:
  // F1(l) = e^{x0} g1 (q G J)^l, G = E e^{b t0 + sigma W_t0}, J = E e^{m + s Z},
  // g1 = (1 - e^{-kappa t0}) / kappa. Both regimes share b and sigma, so the
  // swap does not change the law.
  auto s = exp_no_impulse();
  s.dynamics.drift = {{0.05, 0.0}, {0.05, 0.0}};
  s.dynamics.volatility = {{0.2, 0.0}, {0.2, 0.0}};
  s.kernel.intervention_enabled = true;
  s.kernel.m_lo = -1.0;
  s.kernel.m_hi = 1.0;
  s.kernel.jump_std = 0.5;
  s.cost.form = CostSpec::Form::Constant;
  s.cost.level = 0.0;
  FSeriesOptions opt;
  opt.x_lo = -12.0;
  opt.x_hi = 12.0;
  opt.n_points = 4801;
  const double m = -0.8;
  const auto series = f_series(s, FixedCadence{1.0, m}, 4, {0, 0.0}, opt);
  const double kappa = 0.5 - 0.05 - 0.02;
  const double g1 = -std::expm1(-kappa) / kappa;
  const double growth = std::exp(-0.5) * std::exp(0.05 + 0.02) * std::exp(m + 0.125);
  for (int l = 0; l <= 4; ++l) {
    CHECK(series.f1[l] == doctest::Approx(g1 * std::pow(growth, l)).epsilon(1e-4));
  }
  CHECK(series.tail_from_growth);
}

TEST_CASE("f_series agrees with Monte Carlo for zero cost") {
  auto s = arctan_swap();
  s.cost.form = CostSpec::Form::Constant;
  s.cost.level = 0.0;
  const FixedCadence cadence{1.0, 0.3};
  const auto series = f_series(s, cadence, 25, {0, 0.0});
  McOptions mc;
  mc.n_paths = 20000;
  mc.horizon = 30.0;
  mc.seed = 21;
  const auto g = estimate_gain(Strategy{cadence, 1000}, {0, 0.0}, mc, s);
  for (int l = 1; l <= 25; ++l) CHECK(series.f3[l] == 0.0);
  CHECK(std::abs(g.mean - series.partial_sum) <= 3.0 * g.std_error + series.tail_bound + g.tail_bound);
}

TEST_CASE("audit: intervention disabled reduces to the stopping-free case") {
  auto s = arctan_swap();
  s.kernel.intervention_enabled = false;
  const Grid g{-6.0, 6.0, 61, 0.04};
  const auto fields = solve(s, g);
  AuditOptions opt;
  opt.n_states = 6;
  opt.n_paths = 600;
  opt.horizon = 6.0;
  const auto report = audit_optimality(fields, s, opt);
  CHECK(report.kernel_checks_skipped);
  CHECK(report.states.size() == 6);
  CHECK(report.tstar_ok());
  CHECK(report.stopping_ok());
  CHECK(report.passed());
}

TEST_CASE("audit: example problem on a coarse grid") {
  const auto s = arctan_swap();
  const Grid g{-6.0, 6.0, 121, 0.02};
  const auto fields = solve(s, g);
  AuditOptions opt;
  opt.n_states = 8;
  opt.n_paths = 800;
  opt.horizon = 6.0;
  const auto report = audit_optimality(fields, s, opt);
  CHECK_FALSE(report.kernel_checks_skipped);
  CHECK(report.max_kernel_violation <= report.tol_c);
  CHECK(report.max_rstar_gap <= report.tol_c);
  CHECK(report.passed());

  // The Dirac member never beats the intervention value.
  const BellmanOperator op(s, g, {});
  for (const auto& st : report.states) {
    CHECK(op.integrand(fields.rho_plus, st.regime, st.x, KernelMember::dirac_mass()) <= st.rho + 1e-12);
  }
}
