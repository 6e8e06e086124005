#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pidpbc/mech_model.hpp"
#include "pidpbc/models.hpp"

using namespace pidpbc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const double psi = 20.0 * std::numbers::pi / 180.0;

VectorXd v1(double x) { return VectorXd::Constant(1, x); }

State<double> cart_state(double qu, double qa, double wu, double wa) { return {v1(qu), v1(qa), v1(wu), v1(wa)}; }

}  // namespace

TEST(CartPendulum, InertiaAtIncline) {
  const auto sys = cart_pendulum_incline<double>();
  const MatrixXd M = assemble_inertia(sys, v1(psi));
  EXPECT_NEAR(M(0, 0), 0.14 * 0.215 * 0.215, 1e-15);
  EXPECT_NEAR(M(0, 1), 0.0301, 1e-15);
  EXPECT_NEAR(M(1, 0), 0.0301, 1e-15);
  EXPECT_NEAR(M(1, 1), 0.58, 1e-15);
}

// Hand-derived equations of motion:
//   m l^2 th'' + m l c x'' - m g l sin th = 0
//   m l c th'' + (Mc + m) x'' - m l sin(th - psi) th'^2 - (Mc + m) g sin psi = tau
// with c = cos(th - psi).
TEST(CartPendulum, ForwardDynamicsMatchesHandDerivation) {
  const auto sys = cart_pendulum_incline<double>();
  const double m = 0.14, Mc = 0.44, l = 0.215, g = 9.81;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double th = 3.0 * U(rng), x = U(rng), w = 4.0 * U(rng), v = U(rng), tau = 2.0 * U(rng);
    const VectorXd acc = forward_dynamics(sys, cart_state(th, x, w, v), v1(tau));
    const double c = std::cos(th - psi);
    Eigen::Matrix2d M;
    M << m * l * l, m * l * c, m * l * c, Mc + m;
    const Eigen::Vector2d rhs(m * g * l * std::sin(th), tau + m * l * std::sin(th - psi) * w * w + (Mc + m) * g * std::sin(psi));
    const Eigen::Vector2d ref = M.lu().solve(rhs);
    EXPECT_NEAR(acc(0), ref(0), 1e-9 * (1 + std::abs(ref(0))));
    EXPECT_NEAR(acc(1), ref(1), 1e-9 * (1 + std::abs(ref(1))));
  }
}

TEST(Coriolis, DecompositionMatchesChristoffelOnRandomSystems) {
  for (int s : {1, 2, 3}) {
    SyntheticOptions o;
    o.s = s, o.m = 2, o.seed = 100 + s;
    const auto sys = synthetic_system<double>(o);
    std::mt19937_64 rng(s);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (int k = 0; k < 1000; ++k) {
      State<double> st{VectorXd::NullaryExpr(s, [&] { return U(rng); }), VectorXd::NullaryExpr(2, [&] { return U(rng); }),
                       VectorXd::NullaryExpr(s, [&] { return U(rng); }), VectorXd::NullaryExpr(2, [&] { return U(rng); })};
      const auto c = coriolis_decomposition(sys, st);
      VectorXd split(s + 2);
      split << c.unactuated_velocity_term + c.coupling_term, c.actuated_term;
      const VectorXd ref = christoffel_coriolis(sys, st);
      ASSERT_LE((split - ref).norm(), 1e-10 * (1 + ref.norm()));
    }
  }
}

TEST(Coriolis, FiniteDifferenceFallbackAgreesWithAnalyticDerivatives) {
  SyntheticOptions o;
  o.s = 2, o.m = 2, o.seed = 9;
  const auto analytic = synthetic_system<double>(o);
  o.analytic_derivatives = false;
  const auto fd = synthetic_system<double>(o);
  ASSERT_FALSE(fd.has_analytic_m_au_jacobians());
  const VectorXd q = (VectorXd(2) << 0.3, -0.7).finished();
  const auto a = analytic.m_au_derivatives(q), b = fd.m_au_derivatives(q);
  for (int k = 0; k < 2; ++k) EXPECT_LE((a[k] - b[k]).cwiseAbs().maxCoeff(), 1e-9);
  const auto ua = analytic.m_uu_derivatives(q), ub = fd.m_uu_derivatives(q);
  for (int k = 0; k < 2; ++k) EXPECT_LE((ua[k] - ub[k]).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Coriolis, SkewSymmetryOfInertiaRate) {
  // qdot^T (dM/dt - 2 C) qdot = 0 with C qdot the Coriolis vector.
  SyntheticOptions o;
  o.s = 2, o.m = 2, o.seed = 5;
  const auto sys = synthetic_system<double>(o);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(-1.5, 1.5);
  for (int k = 0; k < 200; ++k) {
    State<double> st{VectorXd::NullaryExpr(2, [&] { return U(rng); }), VectorXd::NullaryExpr(2, [&] { return U(rng); }),
                     VectorXd::NullaryExpr(2, [&] { return U(rng); }), VectorXd::NullaryExpr(2, [&] { return U(rng); })};
    const VectorXd qd = st.qdot();
    const double h = 1e-5;
    const VectorXd dq = h * st.qdot_u;
    const MatrixXd Mdot = (assemble_inertia(sys, VectorXd(st.q_u + dq)) - assemble_inertia(sys, VectorXd(st.q_u - dq))) / (2 * h);
    const double lhs = qd.dot(Mdot * qd), rhs = 2.0 * qd.dot(christoffel_coriolis(sys, st));
    EXPECT_NEAR(lhs, rhs, 1e-7 * (1 + std::abs(lhs)));
  }
}

TEST(ReducedDynamics, AgreesWithFullForwardDynamics) {
  SyntheticOptions o;
  o.s = 1, o.m = 2, o.seed = 4;
  const auto sys = synthetic_system<double>(o);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    State<double> st{v1(U(rng)), VectorXd::NullaryExpr(2, [&] { return U(rng); }), v1(U(rng)),
                     VectorXd::NullaryExpr(2, [&] { return U(rng); })};
    const VectorXd tau = VectorXd::NullaryExpr(2, [&] { return U(rng); });
    const VectorXd full = forward_dynamics(sys, st, tau);
    // u = tau - grad V_a is the input of the reduced form.
    const VectorXd red = reduced_unactuated_dynamics(sys, st, VectorXd(tau - sys.grad_V_a(st.q_a)));
    EXPECT_NEAR(red(0), full(0), 1e-10 * (1 + std::abs(full(0))));
  }
}

TEST(SystemDefinition, RejectsInconsistentData) {
  auto d = cart_pendulum_incline<double>().definition();
  auto bad = d;
  bad.m_aa = MatrixXd::Constant(1, 1, -1.0);
  EXPECT_THROW(SystemDef<double>{bad}, std::invalid_argument);
  bad = d;
  bad.grad_V_u = nullptr;
  EXPECT_THROW(SystemDef<double>{bad}, std::invalid_argument);
  bad = d;
  bad.m_au = [](const VectorXd&) { return MatrixXd::Zero(2, 1); };
  const SystemDef<double> wrong(bad);
  EXPECT_THROW(wrong.m_au(v1(0.0)), std::invalid_argument);
  const SystemDef<double> ok(d);
  EXPECT_THROW(ok.m_uu(VectorXd::Zero(2)), std::invalid_argument);
}

TEST(SystemDefinition, StateChecksDimensionsAndFiniteness) {
  const auto sys = cart_pendulum_incline<double>();
  State<double> st = cart_state(0.1, 0.2, 0.0, 0.0);
  EXPECT_NO_THROW(st.check(sys));
  st.qdot_a = VectorXd::Zero(2);
  EXPECT_THROW(st.check(sys), std::invalid_argument);
  st = cart_state(std::nan(""), 0, 0, 0);
  EXPECT_THROW(st.check(sys), std::invalid_argument);
}

TEST(SystemDefinition, SingularInertiaIsReported) {
  auto d = cart_pendulum_incline<double>().definition();
  // m_uu below m_au^2 / m_aa at q_u = psi makes the inertia indefinite there.
  d.m_uu = [](const VectorXd&) { return MatrixXd::Constant(1, 1, 0.5 * 0.0301 * 0.0301 / 0.58); };
  const SystemDef<double> sys(d);
  try {
    forward_dynamics(sys, cart_state(psi, 0, 0, 0), v1(0.0));
    FAIL() << "expected SingularityError";
  } catch (const SingularityError& e) {
    ASSERT_EQ(e.q_u().size(), 1u);
    EXPECT_NEAR(e.q_u()[0], psi, 1e-15);
  }
}

TEST(LongDouble, ForwardDynamicsMatchesDouble) {
  const auto sd = cart_pendulum_incline<double>();
  const auto sl = cart_pendulum_incline<long double>();
  using VL = VectorX<long double>;
  const State<long double> stl{VL::Constant(1, 0.4L), VL::Constant(1, -0.2L), VL::Constant(1, 1.1L), VL::Constant(1, 0.3L)};
  const VL al = forward_dynamics(sl, stl, VL(VL::Constant(1, 0.7L)));
  const VectorXd ad = forward_dynamics(sd, cart_state(0.4, -0.2, 1.1, 0.3), v1(0.7));
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(static_cast<double>(al(i)), ad(i), 1e-12);
}
