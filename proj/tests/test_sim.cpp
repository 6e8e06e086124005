#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>
#include <sstream>

#include "pidpbc/analysis.hpp"
#include "pidpbc/models.hpp"
#include "pidpbc/pid_pbc.hpp"
#include "pidpbc/sim.hpp"

using namespace pidpbc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const double psi = 20.0 * std::numbers::pi / 180.0;

VectorXd v1(double x) { return VectorXd::Constant(1, x); }
VectorXd v2(double a, double b) { return (VectorXd(2) << a, b).finished(); }

}  // namespace

TEST(Simulate, LinearLoopMatchesMatrixExponential) {
  // The closed loop of a linear plant is linear in X = (q, qdot, z1).
  const LinearPlant plant = pinned_linear_plant();
  const auto sys = linear_system<double>(plant);
  const auto gains = stabilising_linear_gains<double>();
  const int N = 5;
  MatrixXd F(N, N);
  for (int k = 0; k < N; ++k) {
    VectorXd e = VectorXd::Zero(N);
    e(k) = 1.0;
    F.col(k) = (closed_loop_field(sys, gains, ControllerForm::exact, e, v1(0)) -
                closed_loop_field(sys, gains, ControllerForm::exact, VectorXd(-e), v1(0))) / 2.0;
  }
  SimOptions o;
  o.t_end = 8.0;
  o.dt = 1e-3;
  const VectorXd q0 = v2(0.2, -0.1), qd0 = v2(0.05, 0.3);
  const Trace tr = simulate(sys, gains, q0, qd0, o);
  VectorXd X0(N);
  X0 << q0, qd0, tr.z1.front();
  for (std::size_t k = 0; k < tr.size(); k += 1000) {
    const VectorXd X = (F * tr.t[k]).exp() * X0;
    EXPECT_LE((tr.q[k] - X.head(2)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((tr.qd[k] - X.segment(2, 2)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Simulate, EquilibriumStartIsFlat) {
  const auto sys = cart_pendulum_incline<double>();
  auto gains = cart_pendulum_gains<double>();
  gains.q_star = v2(0.0, 0.25);
  SimOptions o;
  o.t_end = 2.0;
  const Trace tr = simulate(sys, gains, gains.q_star, VectorXd::Zero(2), o);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    ASSERT_LE((tr.q[k] - gains.q_star).cwiseAbs().maxCoeff(), 1e-12);
    ASSERT_LE(tr.qd[k].cwiseAbs().maxCoeff(), 1e-12);
  }
  const auto rate = verify_passivity(tr, SupplyPair::tau_to_ybar_u);
  EXPECT_LE(rate.max_absolute, 1e-9);
}

TEST(Simulate, OpenLoopEnergyIsConserved) {
  const auto sys = cart_pendulum_incline<double>();
  EXPECT_LE(open_loop_energy_drift(sys, v2(0.5, 0.0), v2(1.0, -0.2), 5.0, 1e-3), 1e-9);
}

TEST(Simulate, SetpointChangeStartsNewSegment) {
  const auto sys = cart_pendulum_incline<double>();
  const auto gains = cart_pendulum_gains<double>();
  SimOptions o;
  o.t_end = 2.0;
  o.dt = 1e-3;
  o.setpoints = {{1.0, v2(0.0, -0.3)}};
  const Trace tr = simulate(sys, gains, v2(psi, -0.6), VectorXd::Zero(2), o);
  ASSERT_EQ(tr.segments.size(), 2u);
  EXPECT_NEAR(tr.t[tr.segments[1].begin], 1.0, 1e-12);
  EXPECT_EQ(tr.segments[0].end, tr.segments[1].begin);
  EXPECT_EQ(tr.segments[1].end, tr.size());
  EXPECT_NEAR(tr.segments[1].q_star(1), -0.3, 0.0);
  EXPECT_LE(z1_closed_form_deviation(sys, tr), 1e-9);
  EXPECT_EQ(tr.segment_of(tr.segments[1].begin), 1u);
}

TEST(Simulate, DeterministicCsv) {
  const auto sys = cart_pendulum_incline<double>();
  const auto gains = cart_pendulum_gains<double>();
  SimOptions o;
  o.t_end = 0.5;
  const Trace a = simulate(sys, gains, v2(psi, -0.6), VectorXd::Zero(2), o);
  const Trace b = simulate(sys, gains, v2(psi, -0.6), VectorXd::Zero(2), o);
  std::ostringstream sa, sb;
  write_csv(a, sa);
  write_csv(b, sb);
  EXPECT_EQ(sa.str(), sb.str());
  const auto cols = csv_columns(a);
  const std::vector<std::string> expected{"t",    "q1",   "q2",   "qd1",  "qd2", "z1_1", "u1", "y_u1", "y_a1",
                                          "y_d1", "H_u",  "H_a",  "H_d",  "U",   "detK", "d1"};
  EXPECT_EQ(cols, expected);
  std::istringstream in(sa.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), static_cast<long>(cols.size()) - 1);
}

TEST(Simulate, SingularityCarriesTime) {
  const auto sys = cart_pendulum_incline<double>();
  auto gains = cart_pendulum_gains<double>();
  gains.K_D(0, 0) = -5.0 / ((wellposedness_matrix_K(sys, gains, v1(psi))(0, 0) - 5.0) / 0.1);
  SimOptions o;
  o.t_end = 1.0;
  try {
    simulate(sys, gains, v2(psi, 0.0), VectorXd::Zero(2), o);
    FAIL() << "expected SingularityError";
  } catch (const SingularityError& e) {
    EXPECT_GE(e.time(), 0.0);
  }
}

TEST(Simulate, DivergenceIsReportedAsSimulationError) {
  // Filtered law with the cart gains: the fast filter mode is unstable.
  const auto sys = cart_pendulum_incline<double>();
  const auto gains = cart_pendulum_gains<double>();
  SimOptions o;
  o.t_end = 1.0;
  o.dt = 1e-4;
  o.controller = ControllerForm::approx;
  EXPECT_THROW(simulate(sys, gains, v2(psi, -0.6), VectorXd::Zero(2), o), SimulationError);
}

TEST(Verify, LyapunovAndPassivityOnShortCartTrace) {
  const auto sys = cart_pendulum_incline<double>();
  for (auto mode : {PotentialMode::cancel_Va, PotentialMode::robust_A8}) {
    auto gains = cart_pendulum_gains<double>();
    gains.mode = mode;
    SimOptions o;
    o.t_end = 2.0;
    o.dt = 5e-4;
    const Trace tr = simulate(sys, gains, v2(psi, -0.6), VectorXd::Zero(2), o);
    const auto ly = verify_lyapunov(tr, 1e-8 * o.dt);
    EXPECT_LE(ly.rate.max_relative, 1e-6);
    EXPECT_TRUE(ly.monotone);
    EXPECT_LE(verify_passivity(tr, SupplyPair::u_to_y_u).max_relative, 1e-6);
    EXPECT_LE(verify_passivity(tr, SupplyPair::u_to_y_a).max_relative, 1e-6);
    EXPECT_LE(verify_passivity(tr, SupplyPair::tau_to_ybar_u).max_relative, 1e-6);
    EXPECT_LE(verify_passivity(tr, SupplyPair::tau_to_ybar_a).max_relative, 1e-6);
    for (std::size_t k = 0; k < tr.size(); k += 100) EXPECT_NEAR(tr.U[k], tr.H_d[k], 1e-8 * (1 + std::abs(tr.U[k])));
  }
}

TEST(Verify, ConstantVelocityFreeSystemHasZeroResiduals) {
  // V = 0, m_au constant and no control action: every rate is zero.
  LinearPlant p = pinned_linear_plant();
  p.S_u = MatrixXd::Zero(1, 1);
  const auto sys = linear_system<double>(p);
  auto gains = linear_gains<double>(1, 2, 1, 1, 1, 0, 1, 1);
  SimOptions o;
  o.t_end = 1.0;
  o.dt = 1e-2;
  o.controller = ControllerForm::pi_only;
  const Trace tr = simulate(sys, gains, VectorXd::Zero(2), VectorXd::Zero(2), o);
  EXPECT_EQ(verify_passivity(tr, SupplyPair::u_to_y_u).max_absolute, 0.0);
  EXPECT_EQ(verify_lyapunov(tr).rate.max_absolute, 0.0);
}

TEST(Verify, L2InequalityOnSignConsistentToy) {
  const auto sys = linear_system<double>(pinned_linear_plant(), "toy");
  const auto gains = linear_gains<double>(1, 2, 1, 2, 1, 0, 1, 1);
  SimOptions o;
  o.t_end = 20.0;
  o.dt = 1e-3;
  o.disturbance = [](double t) { return VectorXd::Constant(1, 0.5 * std::sin(2.0 * t)); };
  const Trace tr = simulate(sys, gains, v2(0.2, -0.1), VectorXd::Zero(2), o);
  const auto c = verify_L2_gain(tr);
  EXPECT_TRUE(c.applicable);
  EXPECT_TRUE(c.holds);
  EXPECT_LE(c.lhs, c.rhs + 1e-12);
  // Disturbed dissipation balance.
  EXPECT_LE(verify_lyapunov(tr).rate.max_relative, 1e-6);
  // Not applicable for the cart gains.
  SimOptions oc;
  oc.t_end = 0.1;
  const Trace ct = simulate(cart_pendulum_incline<double>(), cart_pendulum_gains<double>(), v2(0.1, 0), VectorXd::Zero(2), oc);
  EXPECT_FALSE(verify_L2_gain(ct).applicable);
}

TEST(Convergence, SettleTimeOnNominalRun) {
  const auto sys = cart_pendulum_incline<double>();
  const auto gains = cart_pendulum_gains<double>();
  SimOptions o;
  o.t_end = 5.0;
  const Trace tr = simulate(sys, gains, v2(psi, -0.6), VectorXd::Zero(2), o);
  const auto c = detect_convergence(tr, 0.01, 0.01, 0.1);
  EXPECT_TRUE(c.converged);
  EXPECT_GT(c.settle_time, 0.5);
  EXPECT_LT(c.settle_time, 5.0);
  EXPECT_FALSE(detect_convergence(tr, 1e-9, 1e-9, 0.1).converged);
  EXPECT_GT(tr.min_abs_detK, 1.0);
}
