#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "pidpbc/errors.hpp"
#include "pidpbc/gains.hpp"
#include "pidpbc/mech_model.hpp"

namespace pidpbc {

/// m_uu^s = m_uu - m_au^T m_aa^{-1} m_au.
template <typename Scalar>
MatrixX<Scalar> schur_unactuated(const SystemDef<Scalar>& sys, const VectorX<Scalar>& q_u) {
  const MatrixX<Scalar> mau = sys.m_au(q_u);
  MatrixX<Scalar> r = sys.m_uu(q_u) - mau.transpose() * sys.m_aa_inverse() * mau;
  return Scalar(0.5) * (r + r.transpose());
}

/// Locked inertia M_a = [m_au^T m_aa^{-1} m_au, m_au^T; m_au, m_aa].
template <typename Scalar>
MatrixX<Scalar> locked_matrix_Ma(const SystemDef<Scalar>& sys, const VectorX<Scalar>& q_u) {
  const int s = sys.s(), m = sys.m();
  const MatrixX<Scalar> mau = sys.m_au(q_u);
  MatrixX<Scalar> Ma(s + m, s + m);
  Ma.topLeftCorner(s, s) = mau.transpose() * sys.m_aa_inverse() * mau;
  Ma.topRightCorner(s, m) = mau.transpose();
  Ma.bottomLeftCorner(m, s) = mau;
  Ma.bottomRightCorner(m, m) = sys.m_aa();
  return Ma;
}

template <typename Scalar>
struct PassiveOutputs {
  VectorX<Scalar> y_u, y_a, y_d;
};

template <typename Scalar>
VectorX<Scalar> output_y_u(const SystemDef<Scalar>& sys, const State<Scalar>& st) {
  return -(sys.m_aa_inverse() * (sys.m_au(st.q_u) * st.qdot_u));
}

/// y_u = -m_aa^{-1} m_au qdot_u, y_a = qdot_a - y_u, y_d = k_a y_a + k_u y_u.
template <typename Scalar>
PassiveOutputs<Scalar> passive_outputs(const SystemDef<Scalar>& sys, const State<Scalar>& st,
                                       const Gains<Scalar>& gains) {
  st.check(sys);
  PassiveOutputs<Scalar> y;
  y.y_u = output_y_u(sys, st);
  y.y_a = st.qdot_a - y.y_u;
  y.y_d = gains.k_a * y.y_a + gains.k_u * y.y_u;
  return y;
}

template <typename Scalar>
struct Storage {
  Scalar H_u, H_a, H;
};

template <typename Scalar>
Storage<Scalar> storage_functions(const SystemDef<Scalar>& sys, const State<Scalar>& st) {
  st.check(sys);
  const VectorX<Scalar> qd = st.qdot();
  const Scalar V_u = sys.V_u(st.q_u);
  Storage<Scalar> h;
  h.H_u = Scalar(0.5) * st.qdot_u.dot(schur_unactuated(sys, st.q_u) * st.qdot_u) + V_u;
  h.H_a = Scalar(0.5) * qd.dot(locked_matrix_Ma(sys, st.q_u) * qd);
  h.H = Scalar(0.5) * qd.dot(assemble_inertia(sys, st.q_u) * qd) + V_u;
  return h;
}

/// Largest asymmetry of the Jacobians of the rows of m_aa^{-1} m_au at q_u,
/// relative to their size. Zero exactly when A6 holds at that point.
template <typename Scalar>
Scalar integrability_residual(const SystemDef<Scalar>& sys, const VectorX<Scalar>& q_u) {
  using std::abs;
  using std::max;
  const auto rows = sys.m_au_row_jacobians(q_u);
  const MatrixX<Scalar>& Ai = sys.m_aa_inverse();
  Scalar worst{0};
  for (int i = 0; i < sys.m(); ++i) {
    MatrixX<Scalar> Ji = MatrixX<Scalar>::Zero(sys.s(), sys.s());
    for (int j = 0; j < sys.m(); ++j) Ji += Ai(i, j) * rows[j];
    const Scalar scale = Scalar(1) + Ji.cwiseAbs().maxCoeff();
    worst = max(worst, (Ji - Ji.transpose()).cwiseAbs().maxCoeff() / scale);
  }
  return worst;
}

/// V_N(q_u) with grad V_N = m_aa^{-1} m_au. Uses the closed form when the
/// system provides one, otherwise the line integral along 0 -> q_u with
/// composite 64-point Gauss-Legendre, doubling segments until successive
/// estimates agree to 1e-10.
template <typename Scalar>
VectorX<Scalar> potential_integral_VN(const SystemDef<Scalar>& sys, const VectorX<Scalar>& q_u,
                                      Scalar a6_tolerance = Scalar(1e-6)) {
  if (q_u.size() != sys.s()) throw std::invalid_argument("potential_integral_VN: q_u has wrong dimension");
  if (sys.has_closed_form_V_N()) return sys.closed_form_V_N(q_u);
  for (const Scalar t : {Scalar(0), Scalar(0.5), Scalar(1)}) {
    const VectorX<Scalar> p = t * q_u;
    const Scalar r = integrability_residual(sys, p);
    if (r > a6_tolerance)
      throw AssumptionError("A6 violated: rows of m_aa^{-1} m_au are not gradient fields (asymmetry " +
                            std::to_string(static_cast<double>(r)) + ")");
  }
  static const auto rule = numeric::gauss_legendre(64);
  const MatrixX<Scalar>& Ai = sys.m_aa_inverse();
  auto integrate = [&](int segments) {
    VectorX<Scalar> acc = VectorX<Scalar>::Zero(sys.m());
    const Scalar width = Scalar(1) / Scalar(segments);
    for (int seg = 0; seg < segments; ++seg) {
      const Scalar lo = width * Scalar(seg);
      for (std::size_t k = 0; k < rule.first.size(); ++k) {
        const Scalar t = lo + width * Scalar(0.5) * (Scalar(rule.first[k]) + Scalar(1));
        acc += (Scalar(rule.second[k]) * width * Scalar(0.5)) * (Ai * (sys.m_au(t * q_u) * q_u));
      }
    }
    return acc;
  };
  VectorX<Scalar> prev = integrate(1);
  for (int segments = 2; segments <= 1024; segments *= 2) {
    VectorX<Scalar> next = integrate(segments);
    const Scalar change = (next - prev).cwiseAbs().maxCoeff();
    prev = std::move(next);
    if (change < Scalar(1e-10)) break;
  }
  return prev;
}

/// V_0(q_u) = s_a^T V_N(q_u) + c_0, the state-function form of the running
/// integral -s_a^T int y_u dt (so that dV_0/dt = -s_a^T y_u).
template <typename Scalar>
Scalar potential_V0(const SystemDef<Scalar>& sys, const VectorX<Scalar>& q_u, Scalar c0 = Scalar(0)) {
  if (!sys.affine_V_a()) throw AssumptionError("V_0 requires an affine actuated potential (A8)");
  return sys.affine_V_a()->slope.dot(potential_integral_VN(sys, q_u)) + c0;
}

template <typename Scalar>
struct RobustStorage {
  Scalar Hbar_u, Hbar_a;
};

/// Storage functions of the uncancelled plant: Hbar_u = H_u - V_0,
/// Hbar_a = H_a + V_a + V_0.
template <typename Scalar>
RobustStorage<Scalar> robust_storage(const SystemDef<Scalar>& sys, const State<Scalar>& st, Scalar c0 = Scalar(0)) {
  const auto h = storage_functions(sys, st);
  const Scalar V0 = potential_V0(sys, st.q_u, c0);
  return {h.H_u - V0, h.H_a + sys.V_a(st.q_a) + V0};
}

template <typename Scalar>
struct HamiltonianOutputs {
  VectorX<Scalar> Y_u, Y_a;
};

/// [Y_u; Y_a] = [m_aa, 0; I, I][y_u; y_a].
template <typename Scalar>
HamiltonianOutputs<Scalar> hamiltonian_outputs(const SystemDef<Scalar>& sys, const State<Scalar>& st) {
  st.check(sys);
  const VectorX<Scalar> y_u = output_y_u(sys, st);
  return {sys.m_aa() * y_u, st.qdot_a};
}

/// L(q, qdot) = 1/2 qdot_u^T [d/dt m_uu^s + 2 m_au^T m_aa^{-1} grad(m_au qdot_u) - 2 C_mu] qdot_u
///              - qdot_u^T D_mu,
/// with d/dt m_uu^s taken by a central difference along qdot_u. Vanishes
/// identically for any plant in the class.
template <typename Scalar>
Scalar appendix_a_residual(const SystemDef<Scalar>& sys, const State<Scalar>& st) {
  using std::max;
  st.check(sys);
  const VectorX<Scalar>& v = st.qdot_u;
  const Scalar speed = v.cwiseAbs().maxCoeff();
  const Scalar h = Scalar(1e-3) / max(Scalar(1), speed);
  auto along = [&](const VectorX<Scalar>& t) -> MatrixX<Scalar> {
    return schur_unactuated(sys, VectorX<Scalar>(st.q_u + t(0) * v));
  };
  const MatrixX<Scalar> dschur = numeric::central_difference<Scalar>(along, VectorX<Scalar>::Zero(1), 0, h);
  const auto J = detail::product_jacobians(sys, st);
  const MatrixX<Scalar> Cmu = J.muu_qdu - Scalar(0.5) * J.muu_qdu.transpose();
  const MatrixX<Scalar> mau = sys.m_au(st.q_u);
  const MatrixX<Scalar> bracket =
      dschur + Scalar(2) * mau.transpose() * sys.m_aa_inverse() * J.mau_qdu - Scalar(2) * Cmu;
  const VectorX<Scalar> Dmu = J.mauT_qda * v - J.mau_qdu.transpose() * st.qdot_a;
  return Scalar(0.5) * v.dot(bracket * v) - v.dot(Dmu);
}

}  // namespace pidpbc
