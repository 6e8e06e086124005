#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "pidpbc/numeric.hpp"

namespace pidpbc {

enum class PotentialMode {
  cancel_Va,  // inner loop u = tau - grad V_a
  robust_A8,  // tau = u, requires affine V_a
};

inline const char* to_string(PotentialMode mode) {
  return mode == PotentialMode::cancel_Va ? "cancel_Va" : "robust_A8";
}

template <typename Scalar>
struct Gains {
  Scalar k_e{1}, k_a{1}, k_u{-1};
  MatrixX<Scalar> K_P, K_I, K_D;
  PotentialMode mode = PotentialMode::cancel_Va;
  VectorX<Scalar> q_star;  // (q_u*, q_a*)
  Scalar filter_a{200}, filter_b{200};

  /// Throws std::invalid_argument when an invariant is violated.
  void validate(int s, int m) const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("Gains: " + what); };
    if (k_e == Scalar(0) || k_a == Scalar(0) || k_u == Scalar(0)) fail("k_e, k_a and k_u must be nonzero");
    if (k_a == k_u) fail("k_a must differ from k_u");
    check_matrix(K_P, m, "K_P", true);
    check_matrix(K_I, m, "K_I", true);
    check_matrix(K_D, m, "K_D", false);
    if (q_star.size() != s + m) fail("q_star must have n entries");
    if (!(filter_a > Scalar(0)) || !(filter_b > Scalar(0))) fail("filter parameters a, b must be positive");
  }

  /// sign(k_e) = sign(k_a) = sign(k_u); only a warning condition.
  bool sign_condition() const {
    return (k_e > 0) == (k_a > 0) && (k_a > 0) == (k_u > 0);
  }

  VectorX<Scalar> q_u_star(int s) const { return q_star.head(s); }
  VectorX<Scalar> q_a_star(int s) const { return q_star.tail(q_star.size() - s); }

 private:
  static void check_matrix(const MatrixX<Scalar>& A, int m, const char* name, bool strict) {
    const std::string n(name);
    if (A.rows() != m || A.cols() != m) throw std::invalid_argument("Gains: " + n + " must be m x m");
    if ((A - A.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-12) * (Scalar(1) + A.cwiseAbs().maxCoeff()))
      throw std::invalid_argument("Gains: " + n + " must be symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(A, Eigen::EigenvaluesOnly);
    const Scalar lo = es.eigenvalues().minCoeff();
    if (strict ? !(lo > Scalar(0)) : lo < Scalar(-1e-14) * (Scalar(1) + A.cwiseAbs().maxCoeff()))
      throw std::invalid_argument("Gains: " + n + (strict ? " must be positive definite" : " must be positive semidefinite"));
  }
};

template <typename Scalar>
struct ControllerState {
  VectorX<Scalar> z1;
  VectorX<Scalar> z2;  // filter state, approximate form only
};

}  // namespace pidpbc
