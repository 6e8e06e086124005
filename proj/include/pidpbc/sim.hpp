#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "pidpbc/gains.hpp"
#include "pidpbc/mech_model.hpp"

namespace pidpbc {

enum class ControllerForm { exact, approx, pi_only };

const char* to_string(ControllerForm form);
ControllerForm controller_form_from_string(const std::string& name);

struct SetpointChange {
  double time = 0.0;
  Eigen::VectorXd q_star;
};

struct SimOptions {
  double t_end = 10.0;
  double dt = 1e-3;
  ControllerForm controller = ControllerForm::exact;
  std::function<Eigen::VectorXd(double)> disturbance;  // empty means d = 0
  std::vector<SetpointChange> setpoints;                // applied in time order
  double det_threshold = 1e-10;
  // Re-initialise z1 with the current state at each setpoint change.
  bool reinit_on_setpoint = true;
};

/// Samples [begin, end) share one equilibrium q* and integrator constant kappa.
struct Segment {
  std::size_t begin = 0, end = 0;
  Eigen::VectorXd q_star;
  Eigen::VectorXd kappa;
};

struct Trace {
  int s = 0, m = 0;
  double dt = 0.0;
  ControllerForm controller = ControllerForm::exact;
  Gains<double> gains;  // gains of the first segment
  std::vector<double> t;
  std::vector<Eigen::VectorXd> q, qd, z1, z2, u, tau, u_inner, y_u, y_a, y_d, d;
  std::vector<double> H_u, H_a, Hbar_u, Hbar_a, H_d, U, detK;
  std::vector<double> dissipation;        // |y_d|^2_{K_P}
  std::vector<double> disturbance_power;  // y_d^T K(q_u) d
  std::vector<Segment> segments;
  double min_abs_detK = 0.0;

  std::size_t size() const { return t.size(); }
  std::size_t segment_of(std::size_t k) const;
};

/// Closed-loop state X = (q_u, q_a, qdot_u, qdot_a, z1[, z2]) and its rate.
Eigen::VectorXd closed_loop_field(const SystemDef<double>& sys, const Gains<double>& gains, ControllerForm form,
                                  const Eigen::VectorXd& X, const Eigen::VectorXd& d, double det_threshold = 1e-10);

/// Fixed-step RK4 integration of the plant with the PID-PBC loop.
/// z1(0) is set by integrator_init; z2(0) = y_d(0) for the filtered form.
Trace simulate(const SystemDef<double>& sys, const Gains<double>& gains, const Eigen::VectorXd& q0,
               const Eigen::VectorXd& qdot0, const SimOptions& options);

enum class SupplyPair { u_to_y_u, u_to_y_a, tau_to_ybar_u, tau_to_ybar_a };

const char* to_string(SupplyPair which);

struct RateResidual {
  double max_relative = 0.0;
  double max_absolute = 0.0;
  double max_power = 0.0;
  std::size_t stencils = 0;
};

/// Five-point central difference of the storage function against the supplied power.
RateResidual verify_passivity(const Trace& trace, SupplyPair which);

struct LyapunovCheck {
  RateResidual rate;
  bool monotone = false;
  double max_increase = 0.0;  // largest U[k+1] - U[k] within a segment
};

/// dU/dt against -|y_d|^2_{K_P} + y_d^T K d.
LyapunovCheck verify_lyapunov(const Trace& trace, double monotone_tolerance_per_step = 0.0);

struct L2Check {
  bool applicable = false;
  double lhs = 0.0;        // int |y_d|^2 over the trace
  double rhs = 0.0;        // int |d|^2 / lambda_min(K_P) + beta3
  double beta3 = 0.0;      // estimate from the early window
  double min_slack = 0.0;  // smallest rhs - lhs over all prefixes
  bool holds = false;
};

/// Corollary-type prefix inequality int |y_d|^2 <= int |d|^2 / lambda_min(K_P) + beta3,
/// with beta3 fixed from the first `early_fraction` of the trace.
L2Check verify_L2_gain(const Trace& trace, double early_fraction = 0.25);

struct Convergence {
  bool converged = false;
  double settle_time = 0.0;  // first time after which the tolerances hold until the segment end
};

/// Checks |q - q*|_inf <= tol_q and |qdot|_2 <= tol_v over the trailing window of a segment.
Convergence detect_convergence(const Trace& trace, std::size_t segment, double tol_q, double tol_v, double window);
Convergence detect_convergence(const Trace& trace, double tol_q, double tol_v, double window);

/// sup_t |z1(t) - closed_form_z1(t)| over all samples.
double z1_closed_form_deviation(const SystemDef<double>& sys, const Trace& trace);

/// Energy drift of the unforced plant (tau = 0) integrated with RK4.
double open_loop_energy_drift(const SystemDef<double>& sys, const Eigen::VectorXd& q0, const Eigen::VectorXd& qdot0,
                              double t_end, double dt);

/// CSV with columns t, q..., qd..., z1..., u..., y_u..., y_a..., y_d..., H_u, H_a, H_d, U, detK, d...
void write_csv(const Trace& trace, std::ostream& os);
std::vector<std::string> csv_columns(const Trace& trace);

}  // namespace pidpbc
