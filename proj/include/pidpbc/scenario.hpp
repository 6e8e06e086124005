#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "pidpbc/gains.hpp"
#include "pidpbc/models.hpp"
#include "pidpbc/sim.hpp"

namespace pidpbc {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DisturbanceSpec {
  std::string kind = "none";  // none | constant | sine
  Eigen::VectorXd amplitude;  // per actuated coordinate
  double frequency_hz = 0.0;
  double phase_rad = 0.0;
  double start_s = 0.0;

  std::function<Eigen::VectorXd(double)> make(int m) const;
};

struct CheckSpec {
  Eigen::VectorXd q_u_lo, q_u_hi;  // A5/A7 grid range
  int grid_points = 201;
  Eigen::VectorXd box_q_u_lo, box_q_u_hi, box_q_a_lo, box_q_a_hi;  // assumption sample box
  int samples = 200;
};

struct Scenario {
  std::string name;
  std::string system;  // cart_pendulum_incline | linear_chain | linear
  CartPendulumParams cart;
  LinearPlant linear;
  Gains<double> gains;
  Eigen::VectorXd q0, qdot0;
  std::vector<SetpointChange> setpoints;
  double t_end = 10.0;
  double dt = 1e-3;
  ControllerForm controller = ControllerForm::exact;
  DisturbanceSpec disturbance;
  CheckSpec check;
  std::string output_dir = "out";

  int s() const;
  int m() const;
  SystemDef<double> make_system() const;
  SimOptions make_sim_options() const;
};

/// Parses a scenario document. Unknown keys are rejected.
Scenario parse_scenario(const std::string& text, const std::string& origin = "<string>");
Scenario load_scenario(const std::string& path);

/// Canonical scenarios: cart_pendulum, cart_pendulum_ku450, linear_chain.
Scenario builtin_scenario(const std::string& name);

}  // namespace pidpbc
