#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace pidpbc {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace numeric {

/// Step used for Jacobian fallbacks: h = max(1e-6, 1e-7 |x|).
template <typename Scalar>
Scalar jacobian_step(Scalar x) {
  using std::abs;
  using std::max;
  return max(Scalar(1e-6), Scalar(1e-7) * abs(x));
}

/// Fourth-order central difference of a matrix- or vector-valued map along
/// coordinate k. `f` must return an Eigen expression-compatible object.
template <typename Scalar, typename Fn>
auto central_difference(const Fn& f, const VectorX<Scalar>& x, Eigen::Index k, Scalar h) {
  VectorX<Scalar> xp1 = x, xm1 = x, xp2 = x, xm2 = x;
  xp1(k) += h;
  xm1(k) -= h;
  xp2(k) += 2 * h;
  xm2(k) -= 2 * h;
  using Result = std::decay_t<decltype(f(x))>;
  Result d = (-f(xp2) + Scalar(8) * f(xp1) - Scalar(8) * f(xm1) + f(xm2)) / (Scalar(12) * h);
  return d;
}

/// Gradient of a scalar field by fourth-order central differences.
template <typename Fn>
VectorXd gradient(const Fn& f, const VectorXd& x, double h) {
  VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    VectorXd xp1 = x, xm1 = x, xp2 = x, xm2 = x;
    xp1(k) += h;
    xm1(k) -= h;
    xp2(k) += 2 * h;
    xm2(k) -= 2 * h;
    g(k) = (-f(xp2) + 8.0 * f(xp1) - 8.0 * f(xm1) + f(xm2)) / (12.0 * h);
  }
  return g;
}

/// Hessian of a scalar field by fourth-order central differences (the
/// standard 16-point mixed stencil off the diagonal).
template <typename Fn>
MatrixXd hessian(const Fn& f, const VectorXd& x, double h) {
  const Eigen::Index n = x.size();
  MatrixXd H(n, n);
  auto at = [&](Eigen::Index i, int a, Eigen::Index j, int b) {
    VectorXd y = x;
    y(i) += a * h;
    y(j) += b * h;
    return f(y);
  };
  const double f0 = f(x);
  for (Eigen::Index i = 0; i < n; ++i) {
    H(i, i) = (-at(i, 2, i, 0) + 16.0 * at(i, 1, i, 0) - 30.0 * f0 + 16.0 * at(i, -1, i, 0) -
               at(i, -2, i, 0)) /
              (12.0 * h * h);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v =
          8.0 * (at(i, 1, j, -2) + at(i, 2, j, -1) + at(i, -2, j, 1) + at(i, -1, j, 2)) -
          8.0 * (at(i, -1, j, -2) + at(i, -2, j, -1) + at(i, 1, j, 2) + at(i, 2, j, 1)) -
          (at(i, 2, j, -2) + at(i, -2, j, 2) - at(i, -2, j, -2) - at(i, 2, j, 2)) +
          64.0 * (at(i, -1, j, -1) + at(i, 1, j, 1) - at(i, 1, j, -1) - at(i, -1, j, 1));
      H(i, j) = H(j, i) = v / (144.0 * h * h);
    }
  }
  return H;
}

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on P_n in long double.
inline std::pair<std::vector<long double>, std::vector<long double>> gauss_legendre(int n) {
  std::vector<long double> nodes(n), weights(n);
  const long double pi = std::numbers::pi_v<long double>;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    long double x = std::cos(pi * (i + 0.75L) / (n + 0.5L));
    long double dp = 0;
    for (int iter = 0; iter < 100; ++iter) {
      long double p0 = 1, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const long double pk = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1);
      const long double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-19L) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = weights[n - 1 - i] = 2 / ((1 - x * x) * dp * dp);
  }
  return {nodes, weights};
}

/// Smallest eigenvalue of a symmetric matrix.
inline double min_eigenvalue(const MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(A, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace numeric
}  // namespace pidpbc
