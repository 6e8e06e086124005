#pragma once

// Underactuated Euler-Lagrange plants with constant input matrix
// G = [0_{s x m}; I_m], inertia depending only on the unactuated
// coordinates and constant actuated block m_aa:
//
//   M(q_u) q'' + C(q, q') q' + grad V(q) = G tau,
//   M = [m_uu(q_u), m_au(q_u)^T; m_au(q_u), m_aa],  V = V_u(q_u) + V_a(q_a).
//
// Coordinates are stacked unactuated first: q = (q_u, q_a).

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pidpbc/errors.hpp"
#include "pidpbc/numeric.hpp"

namespace pidpbc {

/// V_a(q_a) = slope^T q_a + offset.
template <typename Scalar>
struct AffinePotential {
  VectorX<Scalar> slope;
  Scalar offset{0};
};

template <typename Scalar>
class SystemDef {
 public:
  using Vector = VectorX<Scalar>;
  using Matrix = MatrixX<Scalar>;
  using MatrixField = std::function<Matrix(const Vector&)>;
  using MatrixFieldDerivatives = std::function<std::vector<Matrix>(const Vector&)>;
  using ScalarField = std::function<Scalar(const Vector&)>;
  using VectorField = std::function<Vector(const Vector&)>;

  struct Definition {
    std::string name;
    int unactuated_dof = 0;
    int actuated_dof = 0;
    MatrixField m_uu;  // q_u -> s x s
    MatrixField m_au;  // q_u -> m x s
    Matrix m_aa;       // constant m x m
    // Optional analytic derivatives. Entry k of m_uu_derivatives is
    // d m_uu / d q_u[k]. Entry i of m_au_row_jacobians is the Jacobian of
    // row i of m_au, i.e. (j, k) -> d m_au(i, j) / d q_u[k].
    MatrixFieldDerivatives m_uu_derivatives;
    MatrixFieldDerivatives m_au_row_jacobians;
    ScalarField V_u;
    VectorField grad_V_u;
    ScalarField V_a;
    VectorField grad_V_a;
    std::optional<AffinePotential<Scalar>> affine_V_a;
    VectorField V_N;  // optional closed form of the integral of m_aa^{-1} m_au
  };

  explicit SystemDef(Definition def) : def_(std::move(def)) {
    const int s = def_.unactuated_dof, m = def_.actuated_dof;
    if (s <= 0 || m <= 0) throw std::invalid_argument("SystemDef: need s > 0 and m > 0");
    if (!def_.m_uu || !def_.m_au || !def_.V_u || !def_.grad_V_u || !def_.V_a || !def_.grad_V_a)
      throw std::invalid_argument("SystemDef: inertia blocks, potentials and gradients are required");
    if (def_.m_aa.rows() != m || def_.m_aa.cols() != m)
      throw std::invalid_argument("SystemDef: m_aa must be m x m");
    if ((def_.m_aa - def_.m_aa.transpose()).cwiseAbs().maxCoeff() >
        Scalar(1e-12) * (Scalar(1) + def_.m_aa.cwiseAbs().maxCoeff()))
      throw std::invalid_argument("SystemDef: m_aa must be symmetric");
    Eigen::LLT<Matrix> llt(def_.m_aa);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("SystemDef: m_aa must be positive definite");
    m_aa_inverse_ = llt.solve(Matrix::Identity(m, m));
    if (def_.affine_V_a && def_.affine_V_a->slope.size() != m)
      throw std::invalid_argument("SystemDef: affine V_a slope must have m entries");
  }

  const std::string& name() const { return def_.name; }
  int s() const { return def_.unactuated_dof; }
  int m() const { return def_.actuated_dof; }
  int n() const { return s() + m(); }

  Matrix m_uu(const Vector& q_u) const {
    check_unactuated(q_u);
    Matrix r = def_.m_uu(q_u);
    if (r.rows() != s() || r.cols() != s()) throw std::invalid_argument("m_uu callback returned wrong shape");
    return r;
  }
  Matrix m_au(const Vector& q_u) const {
    check_unactuated(q_u);
    Matrix r = def_.m_au(q_u);
    if (r.rows() != m() || r.cols() != s()) throw std::invalid_argument("m_au callback returned wrong shape");
    return r;
  }
  const Matrix& m_aa() const { return def_.m_aa; }
  const Matrix& m_aa_inverse() const { return m_aa_inverse_; }

  bool has_analytic_m_uu_derivatives() const { return static_cast<bool>(def_.m_uu_derivatives); }
  bool has_analytic_m_au_jacobians() const { return static_cast<bool>(def_.m_au_row_jacobians); }

  /// d m_uu / d q_u[k] for k = 0..s-1.
  std::vector<Matrix> m_uu_derivatives(const Vector& q_u) const {
    check_unactuated(q_u);
    if (def_.m_uu_derivatives) return def_.m_uu_derivatives(q_u);
    std::vector<Matrix> out;
    for (int k = 0; k < s(); ++k)
      out.push_back(numeric::central_difference<Scalar>(def_.m_uu, q_u, k, numeric::jacobian_step(q_u(k))));
    return out;
  }

  /// Jacobian of each row of m_au: entry i maps (j, k) -> d m_au(i, j) / d q_u[k].
  std::vector<Matrix> m_au_row_jacobians(const Vector& q_u) const {
    check_unactuated(q_u);
    if (def_.m_au_row_jacobians) return def_.m_au_row_jacobians(q_u);
    const auto d = m_au_derivatives(q_u);
    std::vector<Matrix> rows(m(), Matrix(s(), s()));
    for (int i = 0; i < m(); ++i)
      for (int k = 0; k < s(); ++k) rows[i].col(k) = d[k].row(i).transpose();
    return rows;
  }

  /// d m_au / d q_u[k] for k = 0..s-1 (each m x s).
  std::vector<Matrix> m_au_derivatives(const Vector& q_u) const {
    check_unactuated(q_u);
    std::vector<Matrix> out;
    if (def_.m_au_row_jacobians) {
      const auto rows = def_.m_au_row_jacobians(q_u);
      for (int k = 0; k < s(); ++k) {
        Matrix dk(m(), s());
        for (int i = 0; i < m(); ++i) dk.row(i) = rows[i].col(k).transpose();
        out.push_back(std::move(dk));
      }
      return out;
    }
    for (int k = 0; k < s(); ++k)
      out.push_back(numeric::central_difference<Scalar>(def_.m_au, q_u, k, numeric::jacobian_step(q_u(k))));
    return out;
  }

  Scalar V_u(const Vector& q_u) const { return def_.V_u(q_u); }
  Vector grad_V_u(const Vector& q_u) const { return def_.grad_V_u(q_u); }
  Scalar V_a(const Vector& q_a) const { return def_.V_a(q_a); }
  Vector grad_V_a(const Vector& q_a) const { return def_.grad_V_a(q_a); }

  const std::optional<AffinePotential<Scalar>>& affine_V_a() const { return def_.affine_V_a; }
  bool has_closed_form_V_N() const { return static_cast<bool>(def_.V_N); }
  Vector closed_form_V_N(const Vector& q_u) const { return def_.V_N(q_u); }

  const Definition& definition() const { return def_; }

 private:
  void check_unactuated(const Vector& q_u) const {
    if (q_u.size() != s()) throw std::invalid_argument("q_u has wrong dimension");
  }

  Definition def_;
  Matrix m_aa_inverse_;
};

template <typename Scalar>
struct State {
  using Vector = VectorX<Scalar>;
  Vector q_u, q_a, qdot_u, qdot_a;

  static State from_stacked(const Vector& q, const Vector& qdot, int s) {
    const int m = static_cast<int>(q.size()) - s;
    return State{q.head(s), q.tail(m), qdot.head(s), qdot.tail(m)};
  }
  Vector q() const {
    Vector r(q_u.size() + q_a.size());
    r << q_u, q_a;
    return r;
  }
  Vector qdot() const {
    Vector r(qdot_u.size() + qdot_a.size());
    r << qdot_u, qdot_a;
    return r;
  }
  template <typename Sys>
  void check(const Sys& sys) const {
    if (q_u.size() != sys.s() || qdot_u.size() != sys.s() || q_a.size() != sys.m() || qdot_a.size() != sys.m())
      throw std::invalid_argument("State dimensions do not match the system");
    if (!q_u.allFinite() || !q_a.allFinite() || !qdot_u.allFinite() || !qdot_a.allFinite())
      throw std::invalid_argument("State has non-finite entries");
  }
};

/// Block inertia [[m_uu, m_au^T], [m_au, m_aa]].
template <typename Scalar>
MatrixX<Scalar> assemble_inertia(const SystemDef<Scalar>& sys, const VectorX<Scalar>& q_u) {
  const int s = sys.s(), m = sys.m();
  MatrixX<Scalar> M(s + m, s + m);
  const MatrixX<Scalar> mau = sys.m_au(q_u);
  M.topLeftCorner(s, s) = sys.m_uu(q_u);
  M.topRightCorner(s, m) = mau.transpose();
  M.bottomLeftCorner(m, s) = mau;
  M.bottomRightCorner(m, m) = sys.m_aa();
  return M;
}

template <typename Scalar>
struct CoriolisTerms {
  VectorX<Scalar> unactuated_velocity_term;  // C_mu(q_u, qdot_u) qdot_u
  VectorX<Scalar> coupling_term;             // D_mu(q_u, qdot)
  VectorX<Scalar> actuated_term;             // grad_{q_u}(m_au qdot_u) qdot_u
};

namespace detail {

// Jacobians with respect to q_u of the products entering the Coriolis split.
template <typename Scalar>
struct ProductJacobians {
  MatrixX<Scalar> muu_qdu;    // d(m_uu qdot_u)/dq_u, s x s
  MatrixX<Scalar> mauT_qda;   // d(m_au^T qdot_a)/dq_u, s x s
  MatrixX<Scalar> mau_qdu;    // d(m_au qdot_u)/dq_u, m x s
};

template <typename Scalar>
ProductJacobians<Scalar> product_jacobians(const SystemDef<Scalar>& sys, const State<Scalar>& st) {
  const int s = sys.s(), m = sys.m();
  const auto dmuu = sys.m_uu_derivatives(st.q_u);
  const auto dmau = sys.m_au_derivatives(st.q_u);
  ProductJacobians<Scalar> J{MatrixX<Scalar>(s, s), MatrixX<Scalar>(s, s), MatrixX<Scalar>(m, s)};
  for (int k = 0; k < s; ++k) {
    J.muu_qdu.col(k) = dmuu[k] * st.qdot_u;
    J.mauT_qda.col(k) = dmau[k].transpose() * st.qdot_a;
    J.mau_qdu.col(k) = dmau[k] * st.qdot_u;
  }
  return J;
}

}  // namespace detail

/// C_mu(q_u, qdot_u) = grad(m_uu qdot_u) - 1/2 grad^T(m_uu qdot_u).
template <typename Scalar>
MatrixX<Scalar> coriolis_matrix_Cmu(const SystemDef<Scalar>& sys, const State<Scalar>& st) {
  const auto J = detail::product_jacobians(sys, st);
  return J.muu_qdu - Scalar(0.5) * J.muu_qdu.transpose();
}

/// Splits C(q, qdot) qdot into the pieces acting on the unactuated rows
/// (C_mu qdot_u and D_mu) and the actuated rows.
template <typename Scalar>
CoriolisTerms<Scalar> coriolis_decomposition(const SystemDef<Scalar>& sys, const State<Scalar>& st) {
  st.check(sys);
  const auto J = detail::product_jacobians(sys, st);
  const MatrixX<Scalar> Cmu = J.muu_qdu - Scalar(0.5) * J.muu_qdu.transpose();
  return {Cmu * st.qdot_u, J.mauT_qda * st.qdot_u - J.mau_qdu.transpose() * st.qdot_a, J.mau_qdu * st.qdot_u};
}

/// Full Coriolis/centrifugal vector from the Christoffel identity
/// C qdot = [grad_q(M qdot) - 1/2 grad_q^T(M qdot)] qdot on the assembled
/// inertia derivatives. Independent of the block split above.
template <typename Scalar>
VectorX<Scalar> christoffel_coriolis(const SystemDef<Scalar>& sys, const State<Scalar>& st) {
  st.check(sys);
  const int s = sys.s(), m = sys.m(), n = s + m;
  const auto dmuu = sys.m_uu_derivatives(st.q_u);
  const auto dmau = sys.m_au_derivatives(st.q_u);
  const VectorX<Scalar> qd = st.qdot();
  VectorX<Scalar> c = VectorX<Scalar>::Zero(n);
  MatrixX<Scalar> dM = MatrixX<Scalar>::Zero(n, n);
  for (int k = 0; k < s; ++k) {
    dM.topLeftCorner(s, s) = dmuu[k];
    dM.topRightCorner(s, m) = dmau[k].transpose();
    dM.bottomLeftCorner(m, s) = dmau[k];
    const VectorX<Scalar> dMqd = dM * qd;
    c += qd(k) * dMqd;
    c(k) -= Scalar(0.5) * qd.dot(dMqd);
  }
  return c;
}

/// Solves M(q_u) qddot = G tau - C qdot - grad V for qddot.
template <typename Scalar>
VectorX<Scalar> forward_dynamics(const SystemDef<Scalar>& sys, const State<Scalar>& st, const VectorX<Scalar>& tau) {
  st.check(sys);
  if (tau.size() != sys.m()) throw std::invalid_argument("forward_dynamics: tau must have m entries");
  const int s = sys.s(), m = sys.m();
  const auto c = coriolis_decomposition(sys, st);
  VectorX<Scalar> rhs(s + m);
  rhs.head(s) = -(c.unactuated_velocity_term + c.coupling_term + sys.grad_V_u(st.q_u));
  rhs.tail(m) = tau - c.actuated_term - sys.grad_V_a(st.q_a);
  Eigen::LLT<MatrixX<Scalar>> llt(assemble_inertia(sys, st.q_u));
  if (llt.info() != Eigen::Success) throw SingularityError("inertia matrix is not positive definite", st.q_u);
  return llt.solve(rhs);
}

/// Unactuated accelerations under the inner loop u = tau - grad V_a, from
/// m_uu^s qddot_u = m_au^T m_aa^{-1} [grad(m_au qdot_u) qdot_u - u] - [C_mu qdot_u + D_mu + grad V_u].
template <typename Scalar>
VectorX<Scalar> reduced_unactuated_dynamics(const SystemDef<Scalar>& sys, const State<Scalar>& st,
                                            const VectorX<Scalar>& u) {
  st.check(sys);
  if (u.size() != sys.m()) throw std::invalid_argument("reduced_unactuated_dynamics: u must have m entries");
  const MatrixX<Scalar> mau = sys.m_au(st.q_u);
  const MatrixX<Scalar> schur = sys.m_uu(st.q_u) - mau.transpose() * sys.m_aa_inverse() * mau;
  const auto c = coriolis_decomposition(sys, st);
  const VectorX<Scalar> rhs = mau.transpose() * (sys.m_aa_inverse() * (c.actuated_term - u)) -
                              (c.unactuated_velocity_term + c.coupling_term + sys.grad_V_u(st.q_u));
  Eigen::LLT<MatrixX<Scalar>> llt(Scalar(0.5) * (schur + schur.transpose()));
  if (llt.info() != Eigen::Success) throw SingularityError("Schur complement m_uu^s is singular", st.q_u);
  return llt.solve(rhs);
}

}  // namespace pidpbc
