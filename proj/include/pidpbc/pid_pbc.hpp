#pragma once

// PID passivity-based controller on the output y_d = k_a y_a + k_u y_u:
//
//   k_e u = -K_P y_d - K_I z1 - K_D dy_d/dt,   dz1/dt = y_d.
//
// The implicit form K(q_u) u = -K_P y_d - K_I z1 - S(q, qdot) evaluates the
// derivative term exactly from the dynamics.

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "pidpbc/errors.hpp"
#include "pidpbc/gains.hpp"
#include "pidpbc/mech_model.hpp"
#include "pidpbc/passivity.hpp"

namespace pidpbc {

namespace detail {

// N = m_aa^{-1} m_au (m_uu^s)^{-1}, m x s.
template <typename Scalar>
MatrixX<Scalar> coupling_gain_N(const SystemDef<Scalar>& sys, const VectorX<Scalar>& q_u, const MatrixX<Scalar>& mau) {
  Eigen::LLT<MatrixX<Scalar>> llt(schur_unactuated(sys, q_u));
  if (llt.info() != Eigen::Success) throw SingularityError("Schur complement m_uu^s is singular", q_u);
  return (sys.m_aa_inverse() * mau) * llt.solve(MatrixX<Scalar>::Identity(sys.s(), sys.s()));
}

}  // namespace detail

/// K(q_u) = k_e I + k_a K_D m_aa^{-1} + k_u K_D m_aa^{-1} m_au (m_uu^s)^{-1} m_au^T m_aa^{-1}.
template <typename Scalar>
MatrixX<Scalar> wellposedness_matrix_K(const SystemDef<Scalar>& sys, const Gains<Scalar>& gains,
                                       const VectorX<Scalar>& q_u) {
  const int m = sys.m();
  const MatrixX<Scalar> mau = sys.m_au(q_u);
  const MatrixX<Scalar>& Ai = sys.m_aa_inverse();
  const MatrixX<Scalar> N = detail::coupling_gain_N(sys, q_u, mau);
  return gains.k_e * MatrixX<Scalar>::Identity(m, m) + gains.k_a * gains.K_D * Ai +
         gains.k_u * gains.K_D * N * mau.transpose() * Ai;
}

/// Derivative-action feedforward S(q, qdot). In robust mode the drift of the
/// uncancelled gradient s_a is folded in, so that the law is written for tau = u.
template <typename Scalar>
VectorX<Scalar> feedforward_S(const SystemDef<Scalar>& sys, const Gains<Scalar>& gains, const State<Scalar>& st) {
  st.check(sys);
  const MatrixX<Scalar> mau = sys.m_au(st.q_u);
  const MatrixX<Scalar>& Ai = sys.m_aa_inverse();
  const MatrixX<Scalar> N = detail::coupling_gain_N(sys, st.q_u, mau);
  const auto c = coriolis_decomposition(sys, st);
  const VectorX<Scalar> R = c.unactuated_velocity_term + c.coupling_term + sys.grad_V_u(st.q_u);
  const VectorX<Scalar> Ai_third = Ai * c.actuated_term;
  VectorX<Scalar> S = -gains.k_u * (gains.K_D * (Ai_third + N * (mau.transpose() * Ai_third) - N * R));
  if (gains.mode == PotentialMode::robust_A8) {
    if (!sys.affine_V_a()) throw AssumptionError("robust mode requires an affine actuated potential (A8)");
    const MatrixX<Scalar> Kd = gains.k_a * gains.K_D * Ai + gains.k_u * gains.K_D * N * mau.transpose() * Ai;
    S -= Kd * sys.affine_V_a()->slope;
  }
  return S;
}

template <typename Scalar>
struct ControlOutput {
  VectorX<Scalar> u;
  VectorX<Scalar> z1dot;
  VectorX<Scalar> z2dot;  // empty unless the filtered form is used
  Scalar det_K = std::numeric_limits<Scalar>::quiet_NaN();
};

/// Solves K(q_u) u = -K_P y_d - K_I z1 - S(q, qdot).
template <typename Scalar>
ControlOutput<Scalar> exact_control(const SystemDef<Scalar>& sys, const Gains<Scalar>& gains, const State<Scalar>& st,
                                    const ControllerState<Scalar>& cs, Scalar det_threshold = Scalar(1e-10)) {
  using std::abs;
  const auto y = passive_outputs(sys, st, gains);
  const MatrixX<Scalar> K = wellposedness_matrix_K(sys, gains, st.q_u);
  const Eigen::PartialPivLU<MatrixX<Scalar>> lu(K);
  const Scalar det = lu.determinant();
  if (!(abs(det) >= det_threshold))
    throw SingularityError("A5 violated: |det K| = " + std::to_string(static_cast<double>(abs(det))), st.q_u);
  ControlOutput<Scalar> out;
  out.u = lu.solve(VectorX<Scalar>(-gains.K_P * y.y_d - gains.K_I * cs.z1 - feedforward_S(sys, gains, st)));
  out.z1dot = y.y_d;
  out.det_K = det;
  return out;
}

/// k_e u = -K_P y_d - K_I z1 - K_D a (y_d - z2),  dz2/dt = b (y_d - z2).
template <typename Scalar>
ControlOutput<Scalar> approx_control(const SystemDef<Scalar>& sys, const Gains<Scalar>& gains,
                                     const State<Scalar>& st, const ControllerState<Scalar>& cs) {
  const auto y = passive_outputs(sys, st, gains);
  const VectorX<Scalar> e = y.y_d - cs.z2;
  ControlOutput<Scalar> out;
  out.u = (-gains.K_P * y.y_d - gains.K_I * cs.z1 - gains.filter_a * (gains.K_D * e)) / gains.k_e;
  out.z1dot = y.y_d;
  out.z2dot = gains.filter_b * e;
  return out;
}

/// K_D = 0 law: k_e u = -K_P y_d - K_I z1.
template <typename Scalar>
ControlOutput<Scalar> pi_control(const SystemDef<Scalar>& sys, const Gains<Scalar>& gains, const State<Scalar>& st,
                                 const ControllerState<Scalar>& cs) {
  const auto y = passive_outputs(sys, st, gains);
  ControlOutput<Scalar> out;
  out.u = (-gains.K_P * y.y_d - gains.K_I * cs.z1) / gains.k_e;
  out.z1dot = y.y_d;
  return out;
}

template <typename Scalar>
struct IntegratorInit {
  VectorX<Scalar> z1_0;
  VectorX<Scalar> kappa;  // z1 = k_a q_a + (k_a - k_u) V_N(q_u) + kappa
};

/// z1(0) placing the closed-loop equilibrium at q_star:
///   z1_0 = k_a (q_a(0) - q_a*) + (k_a - k_u)(V_N(q_u(0)) - V_N(q_u*)),
/// shifted by -k_e K_I^{-1} s_a in robust mode where grad V_a is not cancelled.
template <typename Scalar>
IntegratorInit<Scalar> integrator_init(const SystemDef<Scalar>& sys, const Gains<Scalar>& gains,
                                       const VectorX<Scalar>& q0, Scalar critical_tolerance = Scalar(1e-8)) {
  const int s = sys.s();
  if (q0.size() != sys.n()) throw std::invalid_argument("integrator_init: q0 must have n entries");
  const VectorX<Scalar> qus = gains.q_u_star(s), qas = gains.q_a_star(s);
  const Scalar grad = sys.grad_V_u(qus).cwiseAbs().maxCoeff();
  if (!(grad <= critical_tolerance))
    throw AssumptionError("q_u* is not a critical point of V_u (|grad V_u| = " +
                          std::to_string(static_cast<double>(grad)) + ")");
  const VectorX<Scalar> q_u0 = q0.head(s), q_a0 = q0.tail(sys.m());
  const VectorX<Scalar> VN0 = potential_integral_VN(sys, q_u0);
  IntegratorInit<Scalar> r;
  r.z1_0 = gains.k_a * (q_a0 - qas) + (gains.k_a - gains.k_u) * (VN0 - potential_integral_VN(sys, qus));
  if (gains.mode == PotentialMode::robust_A8) {
    if (!sys.affine_V_a()) throw AssumptionError("robust mode requires an affine actuated potential (A8)");
    r.z1_0 -= gains.k_e * gains.K_I.llt().solve(sys.affine_V_a()->slope);
  }
  r.kappa = r.z1_0 - gains.k_a * q_a0 - (gains.k_a - gains.k_u) * VN0;
  return r;
}

/// z1 = k_a q_a + (k_a - k_u) V_N(q_u) + kappa.
template <typename Scalar>
VectorX<Scalar> closed_form_z1(const SystemDef<Scalar>& sys, const Gains<Scalar>& gains, const State<Scalar>& st,
                               const VectorX<Scalar>& kappa) {
  return gains.k_a * st.q_a + (gains.k_a - gains.k_u) * potential_integral_VN(sys, st.q_u) + kappa;
}

/// Torque applied to the plant for controller output u.
template <typename Scalar>
VectorX<Scalar> plant_input(const SystemDef<Scalar>& sys, const Gains<Scalar>& gains, const VectorX<Scalar>& q_a,
                            const VectorX<Scalar>& u) {
  if (gains.mode == PotentialMode::robust_A8) {
    if (!sys.affine_V_a()) throw AssumptionError("robust mode requires an affine actuated potential (A8)");
    return u;
  }
  return u + sys.grad_V_a(q_a);
}

/// Warning text when sign(k_e) = sign(k_a) = sign(k_u) does not hold.
template <typename Scalar>
std::optional<std::string> sign_condition_warning(const Gains<Scalar>& gains) {
  if (gains.sign_condition()) return std::nullopt;
  return std::string("gains do not satisfy sign(k_e) = sign(k_a) = sign(k_u); passivity of the PID loop "
                     "and the L2 bound do not apply");
}

}  // namespace pidpbc
