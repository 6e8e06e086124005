#pragma once

// Built-in plants: cart-pendulum on an inclined plane, linear systems
// M q'' + S q = G tau, and seeded random nonlinear plants satisfying the
// gradient-field structure assumption.

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "pidpbc/gains.hpp"
#include "pidpbc/mech_model.hpp"

namespace pidpbc {

inline constexpr double standard_gravity = 9.81;

struct CartPendulumParams {
  double pendulum_mass = 0.14;  // m [kg]
  double cart_mass = 0.44;      // M_c [kg]
  double length = 0.215;        // l [m]
  double incline_deg = 20.0;    // psi
  double gravity = standard_gravity;

  double psi() const { return incline_deg * std::numbers::pi / 180.0; }
};

/// q_u = pendulum angle from upright, q_a = cart position along the incline.
///   M = [m l^2, m l cos(q_u - psi); m l cos(q_u - psi), M_c + m]
///   V = m g l cos(q_u) - (M_c + m) g sin(psi) q_a
template <typename Scalar = double>
SystemDef<Scalar> cart_pendulum_incline(const CartPendulumParams& p = {}) {
  using std::cos;
  using std::sin;
  using V = VectorX<Scalar>;
  using M = MatrixX<Scalar>;
  const Scalar m = p.pendulum_mass, Mc = p.cart_mass, l = p.length, g = p.gravity;
  const Scalar psi = Scalar(p.incline_deg) * std::numbers::pi_v<Scalar> / Scalar(180);
  const Scalar ml = m * l, mgl = m * g * l;
  const Scalar s_a = -(Mc + m) * g * sin(psi);

  typename SystemDef<Scalar>::Definition d;
  d.name = "cart_pendulum_incline";
  d.unactuated_dof = 1;
  d.actuated_dof = 1;
  d.m_uu = [=](const V&) { return M::Constant(1, 1, m * l * l); };
  d.m_au = [=](const V& q) {
    using std::cos;
    return M::Constant(1, 1, ml * cos(q(0) - psi));
  };
  d.m_aa = M::Constant(1, 1, Mc + m);
  d.m_uu_derivatives = [](const V&) { return std::vector<M>{M::Zero(1, 1)}; };
  d.m_au_row_jacobians = [=](const V& q) {
    using std::sin;
    return std::vector<M>{M::Constant(1, 1, -ml * sin(q(0) - psi))};
  };
  d.V_u = [=](const V& q) {
    using std::cos;
    return mgl * cos(q(0));
  };
  d.grad_V_u = [=](const V& q) {
    using std::sin;
    return V::Constant(1, -mgl * sin(q(0)));
  };
  d.V_a = [=](const V& q) { return s_a * q(0); };
  d.grad_V_a = [=](const V&) { return V::Constant(1, s_a); };
  d.affine_V_a = AffinePotential<Scalar>{V::Constant(1, s_a), Scalar(0)};
  d.V_N = [=](const V& q) {
    using std::sin;
    return V::Constant(1, ml / (Mc + m) * sin(q(0) - psi));
  };
  return SystemDef<Scalar>(std::move(d));
}

/// Gains of the cart-pendulum example: k_e = 5, k_a = 50, k_u = -500
/// (or the supplied k_u), K_P = 1, K_I = 2, K_D = 0.1, q* = (0, q_a*).
template <typename Scalar = double>
Gains<Scalar> cart_pendulum_gains(double k_u = -500.0, double q_a_star = 0.0,
                                  PotentialMode mode = PotentialMode::robust_A8) {
  Gains<Scalar> g;
  g.k_e = 5;
  g.k_a = 50;
  g.k_u = Scalar(k_u);
  g.K_P = MatrixX<Scalar>::Constant(1, 1, 1);
  g.K_I = MatrixX<Scalar>::Constant(1, 1, 2);
  g.K_D = MatrixX<Scalar>::Constant(1, 1, Scalar(0.1));
  g.mode = mode;
  g.q_star = VectorX<Scalar>(2);
  g.q_star << 0, Scalar(q_a_star);
  return g;
}

/// M q'' + S q = [0; I] tau with S = diag(S_u, S_a).
struct LinearPlant {
  Eigen::MatrixXd M;    // n x n SPD, unactuated block first
  Eigen::MatrixXd S_u;  // s x s symmetric
  Eigen::MatrixXd S_a;  // m x m symmetric; empty means zero
  int s = 1;
};

template <typename Scalar = double>
SystemDef<Scalar> linear_system(const LinearPlant& plant, const std::string& name = "linear") {
  using V = VectorX<Scalar>;
  using Mat = MatrixX<Scalar>;
  const int n = static_cast<int>(plant.M.rows()), s = plant.s, m = n - s;
  if (plant.M.cols() != n || s <= 0 || m <= 0) throw std::invalid_argument("linear_system: bad dimensions");
  if (plant.S_u.rows() != s || plant.S_u.cols() != s) throw std::invalid_argument("linear_system: S_u must be s x s");
  const Mat M = plant.M.cast<Scalar>();
  const Mat Su = plant.S_u.cast<Scalar>();
  const Mat Sa = plant.S_a.size() ? Mat(plant.S_a.cast<Scalar>()) : Mat(Mat::Zero(m, m));
  if (Sa.rows() != m || Sa.cols() != m) throw std::invalid_argument("linear_system: S_a must be m x m");
  const Mat muu = M.topLeftCorner(s, s), mau = M.bottomLeftCorner(m, s), maa = M.bottomRightCorner(m, m);
  const Mat vn = maa.llt().solve(mau);

  typename SystemDef<Scalar>::Definition d;
  d.name = name;
  d.unactuated_dof = s;
  d.actuated_dof = m;
  d.m_uu = [=](const V&) { return muu; };
  d.m_au = [=](const V&) { return mau; };
  d.m_aa = maa;
  d.m_uu_derivatives = [=](const V&) { return std::vector<Mat>(s, Mat::Zero(s, s)); };
  d.m_au_row_jacobians = [=](const V&) { return std::vector<Mat>(m, Mat::Zero(s, s)); };
  d.V_u = [=](const V& q) { return Scalar(0.5) * q.dot(Su * q); };
  d.grad_V_u = [=](const V& q) { return V(Su * q); };
  d.V_a = [=](const V& q) { return Scalar(0.5) * q.dot(Sa * q); };
  d.grad_V_a = [=](const V& q) { return V(Sa * q); };
  if (Sa.isZero(0)) d.affine_V_a = AffinePotential<Scalar>{V::Zero(m), Scalar(0)};
  d.V_N = [=](const V& q) { return V(vn * q); };
  return SystemDef<Scalar>(std::move(d));
}

/// Two-DOF instance M = [[2, 1], [1, 1]], S_u = 1.
inline LinearPlant pinned_linear_plant() {
  LinearPlant p;
  p.M = (Eigen::MatrixXd(2, 2) << 2, 1, 1, 1).finished();
  p.S_u = Eigen::MatrixXd::Constant(1, 1, 1.0);
  p.S_a = Eigen::MatrixXd::Zero(1, 1);
  p.s = 1;
  return p;
}

template <typename Scalar = double>
Gains<Scalar> linear_gains(double k_e, double k_a, double k_u, double K_P, double K_I, double K_D, int s, int m) {
  Gains<Scalar> g;
  g.k_e = Scalar(k_e);
  g.k_a = Scalar(k_a);
  g.k_u = Scalar(k_u);
  g.K_P = Scalar(K_P) * MatrixX<Scalar>::Identity(m, m);
  g.K_I = Scalar(K_I) * MatrixX<Scalar>::Identity(m, m);
  g.K_D = Scalar(K_D) * MatrixX<Scalar>::Identity(m, m);
  g.mode = PotentialMode::cancel_Va;
  g.q_star = VectorX<Scalar>::Zero(s + m);
  return g;
}

/// Pinned gains for the two-DOF instance (not Hurwitz) and a stabilising set.
template <typename Scalar = double>
Gains<Scalar> pinned_linear_gains() {
  return linear_gains<Scalar>(1, 1, -1, 4, 2, 1, 1, 1);
}
template <typename Scalar = double>
Gains<Scalar> stabilising_linear_gains() {
  return linear_gains<Scalar>(-1, 3, -2, 4, 2, 2, 1, 1);
}

struct SyntheticOptions {
  int s = 1;
  int m = 2;
  unsigned seed = 1;
  int harmonics = 2;
  bool analytic_derivatives = true;
};

/// Random plant with m_aa^{-1} m_au = grad phi, phi_i(q) = a_i^T q + sum_r beta_ir sin(c_ir^T q + delta_ir),
/// m_uu = m_au^T m_aa^{-1} m_au + P(q) with P(q) = P_0 + sum_r (1 + eps_r sin(e_r^T q)) w_r w_r^T,
/// V_u = 1/2 q^T S q + alpha sum (1 - cos q_k), V_a affine.
template <typename Scalar = double>
SystemDef<Scalar> synthetic_system(const SyntheticOptions& opt) {
  using V = VectorX<Scalar>;
  using Mat = MatrixX<Scalar>;
  const int s = opt.s, m = opt.m, R = opt.harmonics;
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  auto rand_matrix = [&](int r, int c) {
    Mat A(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) A(i, j) = Scalar(U(rng));
    return A;
  };

  const Mat Bm = rand_matrix(m, m);
  const Mat maa = Bm * Bm.transpose() + Scalar(m) * Mat::Identity(m, m);
  const Mat a = rand_matrix(m, s);
  std::vector<Mat> c(m), beta(m), delta(m);
  for (int i = 0; i < m; ++i) {
    c[i] = rand_matrix(s, R);
    beta[i] = Scalar(0.3) * rand_matrix(1, R);
    delta[i] = Scalar(3) * rand_matrix(1, R);
  }
  const Mat Bp = rand_matrix(s, s);
  const Mat P0 = Bp * Bp.transpose() + Scalar(0.5) * Mat::Identity(s, s);
  const Mat W = rand_matrix(s, R), E = rand_matrix(s, R);
  Mat eps = rand_matrix(1, R);
  eps = Scalar(0.9) * eps.cwiseAbs();
  const Mat Bs = rand_matrix(s, s);
  const Mat Sq = Bs * Bs.transpose() + Scalar(0.5) * Mat::Identity(s, s);
  const Scalar alpha = Scalar(0.5) * Scalar(std::abs(U(rng)));
  const V slope = rand_matrix(m, 1);
  const Scalar offset = Scalar(U(rng));

  // Jacobian of phi (m x s) and Hessians of phi_i.
  auto jac_phi = [=](const V& q) {
    using std::cos;
    Mat J = a;
    for (int i = 0; i < m; ++i)
      for (int r = 0; r < R; ++r) J.row(i) += beta[i](0, r) * cos(c[i].col(r).dot(q) + delta[i](0, r)) * c[i].col(r).transpose();
    return J;
  };
  auto hess_phi = [=](const V& q) {
    using std::sin;
    std::vector<Mat> H(m, Mat::Zero(s, s));
    for (int i = 0; i < m; ++i)
      for (int r = 0; r < R; ++r)
        H[i] -= beta[i](0, r) * sin(c[i].col(r).dot(q) + delta[i](0, r)) * c[i].col(r) * c[i].col(r).transpose();
    return H;
  };
  auto phi = [=](const V& q) {
    using std::sin;
    V p = a * q;
    for (int i = 0; i < m; ++i)
      for (int r = 0; r < R; ++r) p(i) += beta[i](0, r) * sin(c[i].col(r).dot(q) + delta[i](0, r));
    return p;
  };
  auto P = [=](const V& q) {
    using std::sin;
    Mat Pq = P0;
    for (int r = 0; r < R; ++r) Pq += (Scalar(1) + eps(0, r) * sin(E.col(r).dot(q))) * W.col(r) * W.col(r).transpose();
    return Pq;
  };

  typename SystemDef<Scalar>::Definition d;
  d.name = "synthetic_s" + std::to_string(s) + "_m" + std::to_string(m) + "_seed" + std::to_string(opt.seed);
  d.unactuated_dof = s;
  d.actuated_dof = m;
  d.m_aa = maa;
  d.m_au = [=](const V& q) { return Mat(maa * jac_phi(q)); };
  d.m_uu = [=](const V& q) {
    const Mat J = jac_phi(q);
    return Mat(J.transpose() * maa * J + P(q));
  };
  if (opt.analytic_derivatives) {
    d.m_au_row_jacobians = [=](const V& q) {
      const auto H = hess_phi(q);
      std::vector<Mat> rows(m, Mat::Zero(s, s));
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) rows[i] += maa(i, j) * H[j];
      return rows;
    };
    d.m_uu_derivatives = [=](const V& q) {
      using std::cos;
      const Mat J = jac_phi(q);
      const auto H = hess_phi(q);
      std::vector<Mat> out;
      for (int k = 0; k < s; ++k) {
        Mat dJ(m, s);
        for (int i = 0; i < m; ++i) dJ.row(i) = H[i].col(k).transpose();
        Mat dk = dJ.transpose() * maa * J;
        dk += dk.transpose().eval();
        for (int r = 0; r < R; ++r)
          dk += eps(0, r) * cos(E.col(r).dot(q)) * E(k, r) * W.col(r) * W.col(r).transpose();
        out.push_back(dk);
      }
      return out;
    };
  }
  d.V_u = [=](const V& q) {
    using std::cos;
    Scalar v = Scalar(0.5) * q.dot(Sq * q);
    for (int k = 0; k < s; ++k) v += alpha * (Scalar(1) - cos(q(k)));
    return v;
  };
  d.grad_V_u = [=](const V& q) {
    V g = Sq * q;
    g += alpha * q.array().sin().matrix();
    return g;
  };
  d.V_a = [=](const V& q) { return slope.dot(q) + offset; };
  d.grad_V_a = [=](const V&) { return slope; };
  d.affine_V_a = AffinePotential<Scalar>{slope, offset};
  if (opt.analytic_derivatives) d.V_N = [=](const V& q) { return V(phi(q) - phi(V::Zero(s))); };
  return SystemDef<Scalar>(std::move(d));
}

}  // namespace pidpbc
