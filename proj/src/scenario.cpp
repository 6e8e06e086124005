#include "pidpbc/scenario.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace pidpbc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double deg = std::numbers::pi / 180.0;

[[noreturn]] void fail(const std::string& where, const std::string& what) { throw ScenarioError(where + ": " + what); }

void require_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed) {
  if (!node.IsMap()) fail(where, "expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail(where, "unknown key '" + key + "'");
  }
}

double scalar(const YAML::Node& node, const std::string& where) {
  try {
    return node.as<double>();
  } catch (const YAML::Exception&) {
    fail(where, "expected a number");
  }
}

VectorXd vector(const YAML::Node& node, const std::string& where, int size) {
  if (node.IsScalar()) {
    if (size != 1) fail(where, "expected a list of " + std::to_string(size) + " numbers");
    return VectorXd::Constant(1, scalar(node, where));
  }
  if (!node.IsSequence() || static_cast<int>(node.size()) != size)
    fail(where, "expected a list of " + std::to_string(size) + " numbers");
  VectorXd v(size);
  for (int i = 0; i < size; ++i) v(i) = scalar(node[i], where);
  return v;
}

MatrixXd matrix(const YAML::Node& node, const std::string& where, int rows, int cols) {
  if (node.IsScalar()) {
    if (rows != cols) fail(where, "a scalar is only accepted for square matrices");
    return scalar(node, where) * MatrixXd::Identity(rows, cols);
  }
  if (!node.IsSequence() || static_cast<int>(node.size()) != rows)
    fail(where, "expected " + std::to_string(rows) + " rows");
  MatrixXd A(rows, cols);
  for (int i = 0; i < rows; ++i) A.row(i) = vector(node[i], where, cols).transpose();
  return A;
}

MatrixXd square_matrix(const YAML::Node& node, const std::string& where) {
  if (!node.IsSequence() || node.size() == 0) fail(where, "expected a non-empty list of rows");
  const int n = static_cast<int>(node.size());
  return matrix(node, where, n, n);
}

VectorXd angle(const YAML::Node& parent, const std::string& where, const std::string& stem, int size,
               const VectorXd& fallback) {
  const bool r = static_cast<bool>(parent[stem + "_rad"]), d = static_cast<bool>(parent[stem + "_deg"]);
  if (r && d) fail(where, "give " + stem + " either in rad or in deg, not both");
  if (r) return vector(parent[stem + "_rad"], where + "." + stem + "_rad", size);
  if (d) return deg * vector(parent[stem + "_deg"], where + "." + stem + "_deg", size);
  return fallback;
}

VectorXd optional_vector(const YAML::Node& parent, const std::string& key, const std::string& where, int size,
                         const VectorXd& fallback) {
  if (!parent[key]) return fallback;
  return vector(parent[key], where + "." + key, size);
}

double optional_scalar(const YAML::Node& parent, const std::string& key, const std::string& where, double fallback) {
  if (!parent[key]) return fallback;
  return scalar(parent[key], where + "." + key);
}

void range(const YAML::Node& node, const std::string& where, int dim, VectorXd& lo, VectorXd& hi) {
  const VectorXd r = vector(node, where, 2);
  if (!(r(0) < r(1))) fail(where, "range must satisfy lo < hi");
  lo = VectorXd::Constant(dim, r(0));
  hi = VectorXd::Constant(dim, r(1));
}

Scenario defaults_for(const std::string& system) {
  if (system == "cart_pendulum_incline") return builtin_scenario("cart_pendulum");
  if (system == "linear_chain") return builtin_scenario("linear_chain");
  if (system == "linear") {
    Scenario sc = builtin_scenario("linear_chain");
    sc.system = "linear";
    sc.name = "linear";
    return sc;
  }
  fail("system.type", "unknown system '" + system + "' (expected cart_pendulum_incline, linear_chain or linear)");
}

}  // namespace

int Scenario::s() const { return system == "cart_pendulum_incline" ? 1 : linear.s; }
int Scenario::m() const { return system == "cart_pendulum_incline" ? 1 : static_cast<int>(linear.M.rows()) - linear.s; }

SystemDef<double> Scenario::make_system() const {
  if (system == "cart_pendulum_incline") return cart_pendulum_incline<double>(cart);
  return linear_system<double>(linear, system);
}

std::function<VectorXd(double)> DisturbanceSpec::make(int m) const {
  if (kind == "none") return {};
  const VectorXd a = amplitude.size() ? amplitude : VectorXd(VectorXd::Zero(m));
  const double w = 2.0 * std::numbers::pi * frequency_hz, ph = phase_rad, t0 = start_s;
  if (kind == "constant")
    return [a, t0](double t) -> VectorXd { return t >= t0 ? a : VectorXd(VectorXd::Zero(a.size())); };
  if (kind == "sine")
    return [a, w, ph, t0](double t) -> VectorXd {
      return t >= t0 ? VectorXd(a * std::sin(w * (t - t0) + ph)) : VectorXd(VectorXd::Zero(a.size()));
    };
  throw ScenarioError("disturbance.kind: unknown kind '" + kind + "' (expected none, constant or sine)");
}

SimOptions Scenario::make_sim_options() const {
  SimOptions o;
  o.t_end = t_end;
  o.dt = dt;
  o.controller = controller;
  o.setpoints = setpoints;
  o.disturbance = disturbance.make(m());
  return o;
}

Scenario parse_scenario(const std::string& text, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ScenarioError(origin + ": " + e.what());
  }
  if (!root.IsMap()) fail(origin, "scenario must be a mapping");
  require_keys(root, origin,
               {"name", "system", "gains", "initial", "target", "setpoints", "simulation", "disturbance", "check",
                "output"});
  if (!root["system"]) fail(origin, "missing 'system' section");
  const YAML::Node sys = root["system"];
  if (!sys.IsMap() || !sys["type"]) fail("system", "missing 'type'");
  const std::string type = sys["type"].as<std::string>();
  Scenario sc = defaults_for(type);
  sc.name = root["name"] ? root["name"].as<std::string>() : type;

  if (type == "cart_pendulum_incline") {
    require_keys(sys, "system", {"type", "pendulum_mass_kg", "cart_mass_kg", "length_m", "incline_deg", "gravity_mps2"});
    sc.cart.pendulum_mass = optional_scalar(sys, "pendulum_mass_kg", "system", sc.cart.pendulum_mass);
    sc.cart.cart_mass = optional_scalar(sys, "cart_mass_kg", "system", sc.cart.cart_mass);
    sc.cart.length = optional_scalar(sys, "length_m", "system", sc.cart.length);
    sc.cart.incline_deg = optional_scalar(sys, "incline_deg", "system", sc.cart.incline_deg);
    sc.cart.gravity = optional_scalar(sys, "gravity_mps2", "system", sc.cart.gravity);
    if (!(sc.cart.pendulum_mass > 0 && sc.cart.cart_mass > 0 && sc.cart.length > 0))
      fail("system", "masses and length must be positive");
  } else if (type == "linear") {
    require_keys(sys, "system", {"type", "inertia", "unactuated_dof", "stiffness_unactuated", "stiffness_actuated"});
    if (!sys["inertia"] || !sys["unactuated_dof"] || !sys["stiffness_unactuated"])
      fail("system", "linear systems need inertia, unactuated_dof and stiffness_unactuated");
    sc.linear.M = square_matrix(sys["inertia"], "system.inertia");
    sc.linear.s = sys["unactuated_dof"].as<int>();
    const int n = static_cast<int>(sc.linear.M.rows()), s = sc.linear.s;
    if (s <= 0 || s >= n) fail("system.unactuated_dof", "must satisfy 0 < s < n");
    sc.linear.S_u = matrix(sys["stiffness_unactuated"], "system.stiffness_unactuated", s, s);
    sc.linear.S_a = sys["stiffness_actuated"] ? matrix(sys["stiffness_actuated"], "system.stiffness_actuated", n - s, n - s)
                                              : MatrixXd(MatrixXd::Zero(n - s, n - s));
    sc.gains = linear_gains<double>(sc.gains.k_e, sc.gains.k_a, sc.gains.k_u, 1, 1, 0, s, n - s);
    sc.q0 = VectorXd::Zero(n);
    sc.qdot0 = VectorXd::Zero(n);
    sc.check.q_u_lo = VectorXd::Constant(s, -1.0);
    sc.check.q_u_hi = VectorXd::Constant(s, 1.0);
    sc.check.box_q_u_lo = sc.check.q_u_lo;
    sc.check.box_q_u_hi = sc.check.q_u_hi;
    sc.check.box_q_a_lo = VectorXd::Constant(n - s, -1.0);
    sc.check.box_q_a_hi = VectorXd::Constant(n - s, 1.0);
  } else {
    require_keys(sys, "system", {"type"});
  }
  const int s = sc.s(), m = sc.m(), n = s + m;

  if (const YAML::Node g = root["gains"]) {
    require_keys(g, "gains", {"k_e", "k_a", "k_u", "K_P", "K_I", "K_D", "mode", "filter_a_per_s", "filter_b_per_s"});
    sc.gains.k_e = optional_scalar(g, "k_e", "gains", sc.gains.k_e);
    sc.gains.k_a = optional_scalar(g, "k_a", "gains", sc.gains.k_a);
    sc.gains.k_u = optional_scalar(g, "k_u", "gains", sc.gains.k_u);
    if (g["K_P"]) sc.gains.K_P = matrix(g["K_P"], "gains.K_P", m, m);
    if (g["K_I"]) sc.gains.K_I = matrix(g["K_I"], "gains.K_I", m, m);
    if (g["K_D"]) sc.gains.K_D = matrix(g["K_D"], "gains.K_D", m, m);
    sc.gains.filter_a = optional_scalar(g, "filter_a_per_s", "gains", sc.gains.filter_a);
    sc.gains.filter_b = optional_scalar(g, "filter_b_per_s", "gains", sc.gains.filter_b);
    if (g["mode"]) {
      const auto mode = g["mode"].as<std::string>();
      if (mode == "cancel_Va")
        sc.gains.mode = PotentialMode::cancel_Va;
      else if (mode == "robust_A8")
        sc.gains.mode = PotentialMode::robust_A8;
      else
        fail("gains.mode", "expected cancel_Va or robust_A8");
    }
  }

  if (const YAML::Node ini = root["initial"]) {
    require_keys(ini, "initial", {"q_u_rad", "q_u_deg", "q_a_m", "qdot_u_radps", "qdot_a_mps"});
    sc.q0.head(s) = angle(ini, "initial", "q_u", s, sc.q0.head(s));
    sc.q0.tail(m) = optional_vector(ini, "q_a_m", "initial", m, sc.q0.tail(m));
    sc.qdot0.head(s) = optional_vector(ini, "qdot_u_radps", "initial", s, sc.qdot0.head(s));
    sc.qdot0.tail(m) = optional_vector(ini, "qdot_a_mps", "initial", m, sc.qdot0.tail(m));
  }
  if (const YAML::Node tg = root["target"]) {
    require_keys(tg, "target", {"q_u_rad", "q_u_deg", "q_a_m"});
    VectorXd qs = sc.gains.q_star;
    qs.head(s) = angle(tg, "target", "q_u", s, qs.head(s));
    qs.tail(m) = optional_vector(tg, "q_a_m", "target", m, qs.tail(m));
    sc.gains.q_star = qs;
  }
  if (const YAML::Node sp = root["setpoints"]) {
    if (!sp.IsSequence()) fail("setpoints", "expected a list");
    sc.setpoints.clear();
    VectorXd prev = sc.gains.q_star;
    for (std::size_t i = 0; i < sp.size(); ++i) {
      const std::string where = "setpoints[" + std::to_string(i) + "]";
      require_keys(sp[i], where, {"time_s", "q_u_rad", "q_u_deg", "q_a_m"});
      if (!sp[i]["time_s"]) fail(where, "missing time_s");
      SetpointChange c;
      c.time = scalar(sp[i]["time_s"], where + ".time_s");
      c.q_star = prev;
      c.q_star.head(s) = angle(sp[i], where, "q_u", s, prev.head(s));
      c.q_star.tail(m) = optional_vector(sp[i], "q_a_m", where, m, prev.tail(m));
      prev = c.q_star;
      sc.setpoints.push_back(c);
    }
  }
  if (const YAML::Node sim = root["simulation"]) {
    require_keys(sim, "simulation", {"t_end_s", "dt_s", "controller"});
    sc.t_end = optional_scalar(sim, "t_end_s", "simulation", sc.t_end);
    sc.dt = optional_scalar(sim, "dt_s", "simulation", sc.dt);
    if (sim["controller"]) {
      try {
        sc.controller = controller_form_from_string(sim["controller"].as<std::string>());
      } catch (const std::invalid_argument& e) {
        fail("simulation.controller", e.what());
      }
    }
    if (!(sc.dt > 0) || !(sc.t_end > 0)) fail("simulation", "t_end_s and dt_s must be positive");
  }
  if (const YAML::Node d = root["disturbance"]) {
    require_keys(d, "disturbance", {"kind", "amplitude_N", "frequency_hz", "phase_rad", "start_s"});
    sc.disturbance.kind = d["kind"] ? d["kind"].as<std::string>() : "none";
    sc.disturbance.amplitude = optional_vector(d, "amplitude_N", "disturbance", m, VectorXd::Zero(m));
    sc.disturbance.frequency_hz = optional_scalar(d, "frequency_hz", "disturbance", 0.0);
    sc.disturbance.phase_rad = optional_scalar(d, "phase_rad", "disturbance", 0.0);
    sc.disturbance.start_s = optional_scalar(d, "start_s", "disturbance", 0.0);
    if (sc.disturbance.kind != "none" && sc.disturbance.kind != "constant" && sc.disturbance.kind != "sine")
      fail("disturbance.kind", "expected none, constant or sine");
  }
  if (const YAML::Node c = root["check"]) {
    require_keys(c, "check", {"q_u_range_rad", "grid_points", "box_q_u_rad", "box_q_a_m", "samples"});
    if (c["q_u_range_rad"]) range(c["q_u_range_rad"], "check.q_u_range_rad", s, sc.check.q_u_lo, sc.check.q_u_hi);
    if (c["box_q_u_rad"]) range(c["box_q_u_rad"], "check.box_q_u_rad", s, sc.check.box_q_u_lo, sc.check.box_q_u_hi);
    if (c["box_q_a_m"]) range(c["box_q_a_m"], "check.box_q_a_m", m, sc.check.box_q_a_lo, sc.check.box_q_a_hi);
    if (c["grid_points"]) sc.check.grid_points = c["grid_points"].as<int>();
    if (c["samples"]) sc.check.samples = c["samples"].as<int>();
    if (sc.check.grid_points < 2 || sc.check.samples < 100) fail("check", "need grid_points >= 2 and samples >= 100");
  }
  if (const YAML::Node o = root["output"]) {
    require_keys(o, "output", {"directory"});
    if (o["directory"]) sc.output_dir = o["directory"].as<std::string>();
  }

  try {
    sc.gains.validate(s, m);
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(std::string("gains: ") + e.what());
  }
  if (sc.q0.size() != n || sc.qdot0.size() != n) fail(origin, "initial state has wrong dimension");
  if (sc.gains.mode == PotentialMode::robust_A8 && type != "cart_pendulum_incline" && !sc.linear.S_a.isZero(0))
    fail("gains.mode", "robust_A8 needs an affine actuated potential; stiffness_actuated must be zero");
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

Scenario builtin_scenario(const std::string& name) {
  Scenario sc;
  if (name == "cart_pendulum" || name == "cart_pendulum_ku450") {
    sc.name = name;
    sc.system = "cart_pendulum_incline";
    sc.gains = cart_pendulum_gains<double>(name == "cart_pendulum" ? -500.0 : -450.0, 0.0);
    sc.q0 = (VectorXd(2) << 20.0 * deg, -0.6).finished();
    sc.qdot0 = VectorXd::Zero(2);
    sc.setpoints = {{5.0, (VectorXd(2) << 0.0, -0.3).finished()}};
    sc.t_end = 10.0;
    sc.dt = 1e-3;
    sc.check.q_u_lo = VectorXd::Constant(1, -0.35);
    sc.check.q_u_hi = VectorXd::Constant(1, 1.0);
    sc.check.box_q_u_lo = VectorXd::Constant(1, -std::numbers::pi);
    sc.check.box_q_u_hi = VectorXd::Constant(1, std::numbers::pi);
    sc.check.box_q_a_lo = VectorXd::Constant(1, -1.0);
    sc.check.box_q_a_hi = VectorXd::Constant(1, 1.0);
    sc.output_dir = "out/" + name;
    return sc;
  }
  if (name == "linear_chain" || name == "linear") {
    sc.name = "linear_chain";
    sc.system = "linear_chain";
    sc.linear = pinned_linear_plant();
    sc.gains = stabilising_linear_gains<double>();
    sc.q0 = (VectorXd(2) << 0.2, -0.1).finished();
    sc.qdot0 = VectorXd::Zero(2);
    sc.t_end = 80.0;
    sc.dt = 1e-2;
    sc.check.q_u_lo = VectorXd::Constant(1, -1.0);
    sc.check.q_u_hi = VectorXd::Constant(1, 1.0);
    sc.check.box_q_u_lo = sc.check.q_u_lo;
    sc.check.box_q_u_hi = sc.check.q_u_hi;
    sc.check.box_q_a_lo = VectorXd::Constant(1, -1.0);
    sc.check.box_q_a_hi = VectorXd::Constant(1, 1.0);
    sc.output_dir = "out/linear_chain";
    return sc;
  }
  throw ScenarioError("unknown built-in scenario '" + name + "' (expected cart_pendulum, cart_pendulum_ku450, linear_chain)");
}

}  // namespace pidpbc
