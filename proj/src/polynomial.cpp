#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "pidpbc/analysis.hpp"

namespace pidpbc {

using cd = std::complex<double>;

std::complex<double> polynomial_value(const std::vector<double>& c, cd x) {
  cd acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
  return acc;
}

std::vector<double> determinant_polynomial(const Eigen::MatrixXd& A2, const Eigen::MatrixXd& A1,
                                           const Eigen::MatrixXd& A0) {
  const Eigen::Index n = A2.rows();
  if (A2.cols() != n || A1.rows() != n || A1.cols() != n || A0.rows() != n || A0.cols() != n)
    throw std::invalid_argument("determinant_polynomial: coefficient matrices must be square and equal-sized");
  const int N = static_cast<int>(2 * n + 1);
  std::vector<cd> values(N);
  for (int k = 0; k < N; ++k) {
    const cd w = std::polar(1.0, 2.0 * std::numbers::pi * k / N);
    const Eigen::MatrixXcd P = A2.cast<cd>() * (w * w) + A1.cast<cd>() * w + A0.cast<cd>();
    values[k] = Eigen::PartialPivLU<Eigen::MatrixXcd>(P).determinant();
  }
  std::vector<double> c(N);
  for (int j = 0; j < N; ++j) {
    cd acc = 0.0;
    for (int k = 0; k < N; ++k) acc += values[k] * std::polar(1.0, -2.0 * std::numbers::pi * j * k / N);
    c[j] = acc.real() / N;
  }
  double scale = 0.0;
  for (double v : c) scale = std::max(scale, std::abs(v));
  for (double& v : c)
    if (std::abs(v) <= 1e-13 * scale) v = 0.0;
  while (c.size() > 1 && c.back() == 0.0) c.pop_back();
  return c;
}

std::vector<std::complex<double>> polynomial_roots(const std::vector<double>& coefficients) {
  std::vector<double> c = coefficients;
  while (!c.empty() && c.back() == 0.0) c.pop_back();
  if (c.size() <= 1) return {};
  const int deg = static_cast<int>(c.size()) - 1;
  const double lead = c.back();
  for (double& v : c) v /= lead;

  std::vector<double> dc(deg);
  for (int j = 1; j <= deg; ++j) dc[j - 1] = j * c[j];

  // Initial guesses on a circle whose radius bounds the root moduli (Fujiwara).
  double radius = 0.0;
  for (int j = 0; j < deg; ++j) radius = std::max(radius, std::pow(std::abs(c[j]), 1.0 / (deg - j)));
  radius = std::max(radius, 1e-3);
  std::vector<cd> z(deg);
  for (int k = 0; k < deg; ++k) z[k] = std::polar(radius, 2.0 * std::numbers::pi * k / deg + 0.4);

  for (int iter = 0; iter < 500; ++iter) {
    double worst = 0.0;
    for (int k = 0; k < deg; ++k) {
      const cd p = polynomial_value(c, z[k]);
      const cd dp = polynomial_value(dc, z[k]);
      if (p == 0.0) continue;
      const cd ratio = p / dp;
      cd sum = 0.0;
      for (int j = 0; j < deg; ++j)
        if (j != k) sum += 1.0 / (z[k] - z[j]);
      const cd step = ratio / (1.0 - ratio * sum);
      z[k] -= step;
      worst = std::max(worst, std::abs(step) / std::max(1.0, std::abs(z[k])));
    }
    if (worst < 1e-15) break;
  }
  std::sort(z.begin(), z.end(), [](cd a, cd b) { return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag(); });
  return z;
}

}  // namespace pidpbc
