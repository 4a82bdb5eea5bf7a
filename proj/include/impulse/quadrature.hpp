#pragma once

#include <cmath>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "impulse/error.hpp"

namespace impulse {

template <typename Scalar>
struct QuadratureRule {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  Array nodes;
  Array weights;

  Eigen::Index size() const { return nodes.size(); }

  template <typename F>
  Scalar apply(F&& f) const {
    Scalar sum(0);
    for (Eigen::Index k = 0; k < nodes.size(); ++k) sum += weights[k] * f(nodes[k]);
    return sum;
  }
};

namespace detail {

// Golub-Welsch: nodes are eigenvalues of the symmetric Jacobi matrix, weights
// are mu0 times the squared first components of the eigenvectors.
template <typename Scalar>
QuadratureRule<Scalar> golub_welsch(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& off_diagonal, int n,
                                    Scalar mu0) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Vector diagonal = Vector::Zero(n);
  Eigen::SelfAdjointEigenSolver<Matrix> solver;
  solver.computeFromTridiagonal(diagonal, off_diagonal, Eigen::ComputeEigenvectors);
  QuadratureRule<Scalar> rule;
  rule.nodes = solver.eigenvalues().array();
  rule.weights = mu0 * solver.eigenvectors().row(0).transpose().array().square();
  return rule;
}

}  // namespace detail

/// E[g(Z)], Z ~ N(0,1), as sum w_k g(z_k). Weights sum to one.
template <typename Scalar = double>
QuadratureRule<Scalar> gauss_hermite_normal(int n) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "quadrature order must be >= 1");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> off(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) off[k - 1] = std::sqrt(Scalar(k));
  auto rule = detail::golub_welsch<Scalar>(off, n, Scalar(1));
  rule.weights /= rule.weights.sum();
  return rule;
}

/// Gauss-Legendre rule mapped onto [a, b].
template <typename Scalar = double>
QuadratureRule<Scalar> gauss_legendre(int n, Scalar a, Scalar b) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "quadrature order must be >= 1");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> off(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) off[k - 1] = Scalar(k) / std::sqrt(Scalar(4 * k * k - 1));
  auto rule = detail::golub_welsch<Scalar>(off, n, Scalar(2));
  const Scalar half = (b - a) / Scalar(2);
  rule.nodes = (rule.nodes + Scalar(1)) * half + a;
  rule.weights *= half;
  return rule;
}

}  // namespace impulse
