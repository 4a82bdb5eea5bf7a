#include "doctest.h"

#include <cmath>

#include "impulse/grid.hpp"
#include "impulse/parallel.hpp"
#include "impulse/quadrature.hpp"

using namespace impulse;

TEST_CASE("Gauss-Hermite moments of the standard normal") {
  const auto rule = gauss_hermite_normal(20);
  CHECK(rule.weights.sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(rule.apply([](double z) { return z; })) < 1e-14);
  CHECK(rule.apply([](double z) { return z * z; }) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(rule.apply([](double z) { return std::pow(z, 4); }) == doctest::Approx(3.0).epsilon(1e-13));
  CHECK(rule.apply([](double z) { return std::pow(z, 6); }) == doctest::Approx(15.0).epsilon(1e-12));
  CHECK(rule.apply([](double z) { return std::exp(0.3 * z); }) == doctest::Approx(std::exp(0.045)).epsilon(1e-14));
}

TEST_CASE("Gauss-Hermite in long double agrees with double") {
  const auto d = gauss_hermite_normal<double>(12);
  const auto l = gauss_hermite_normal<long double>(12);
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    CHECK(static_cast<double>(l.nodes[k]) == doctest::Approx(d.nodes[k]).epsilon(1e-12));
  }
}

TEST_CASE("Gauss-Legendre integrates polynomials and exp") {
  const auto rule = gauss_legendre(8, 0.0, 2.0);
  CHECK(rule.apply([](double t) { return std::pow(t, 7); }) == doctest::Approx(256.0 / 8.0).epsilon(1e-13));
  const auto e = gauss_legendre(24, 0.0, 1.0);
  CHECK(e.apply([](double t) { return std::exp(-0.5 * t); }) ==
        doctest::Approx(-std::expm1(-0.5) / 0.5).epsilon(1e-15));
}

TEST_CASE("bracket and interpolation") {
  const Grid g{-1.0, 1.0, 5, 0.01};
  CHECK(g.spacing() == 0.5);
  const auto b = bracket(g, 0.1);
  CHECK(b.left == 2);
  CHECK(b.weight == doctest::Approx(0.2));
  CHECK(bracket(g, -3.0).left == 0);
  CHECK(bracket(g, -3.0).weight == 0.0);
  CHECK(bracket(g, 3.0).left == 3);
  CHECK(bracket(g, 3.0).weight == 1.0);
  CHECK(g.nearest(0.3) == 3);
  CHECK(g.nearest(-9.0) == 0);

  Eigen::ArrayXd linear = 2.0 * g.points() + 1.0;
  CHECK(interpolate(linear, g, 0.1) == doctest::Approx(1.2));
  CHECK(interpolate(linear, g, 5.0) == doctest::Approx(3.0));  // constant extension
  CHECK(interpolate(linear, g, -5.0) == doctest::Approx(-1.0));

  Eigen::ArrayXd exponential = g.points().exp();
  for (double x : {-2.0, -0.3, 0.0, 0.77, 1.6}) {
    CHECK(interpolate(exponential, g, x, Interpolation::LogLinear) == doctest::Approx(std::exp(x)).epsilon(1e-13));
  }
}

TEST_CASE("parallel_for covers every index once and propagates exceptions") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t k) { hits[k] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t k) {
                    if (k == 7) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
}
