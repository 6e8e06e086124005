// pidpbc: command-line front end for scenario checks, simulations, gain sweeps
// and the pinned reproduction runs.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <numbers>
#include <sstream>

#include "pidpbc/acceptance.hpp"
#include "pidpbc/analysis.hpp"
#include "pidpbc/errors.hpp"
#include "pidpbc/pid_pbc.hpp"
#include "pidpbc/scenario.hpp"
#include "pidpbc/sim.hpp"

namespace fs = std::filesystem;
using Eigen::VectorXd;
using json = nlohmann::ordered_json;
using namespace pidpbc;

namespace {

enum Exit { ok = 0, usage = 1, assumption = 2, singularity = 3, acceptance = 4 };

constexpr double tol_q = 0.01, tol_v = 0.01, settle_window = 0.1;

struct Overrides {
  std::string scenario = "cart_pendulum";
  std::string out;
  double dt = 0.0, t_end = 0.0;
  std::string controller;
};

// A path to a scenario file, or the name of a built-in scenario.
Scenario resolve(const Overrides& o) {
  Scenario sc = fs::exists(o.scenario) ? load_scenario(o.scenario) : builtin_scenario(o.scenario);
  if (o.dt > 0) sc.dt = o.dt;
  if (o.t_end > 0) sc.t_end = o.t_end;
  if (!o.controller.empty()) sc.controller = controller_form_from_string(o.controller);
  if (!o.out.empty()) sc.output_dir = o.out;
  return sc;
}

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

struct CheckOutcome {
  AssumptionReport report;
  CheckEntry a5;
  A7Result a7;
  bool ok() const { return report.ok() && a5.ok() && a7.passed; }
};

CheckOutcome run_checks(const Scenario& sc, const SystemDef<double>& sys, const Gains<double>& gains) {
  const SampleBox box{sc.check.box_q_u_lo, sc.check.box_q_u_hi, sc.check.box_q_a_lo, sc.check.box_q_a_hi};
  const auto grid = uniform_grid(sc.check.q_u_lo, sc.check.q_u_hi, sc.check.grid_points);
  return {check_assumptions(sys, box, sc.check.samples), check_A5(sys, gains, grid), check_A7(sys, gains, gains.q_star, grid)};
}

json a7_json(const A7Result& a7) {
  json j;
  j["passed"] = a7.passed;
  j["inertia_positive"] = a7.inertia_positive;
  j["potential_minimum"] = a7.potential_minimum;
  j["worst_eigenvalue"] = a7.worst_eigenvalue;
  j["worst_point"] = to_std(a7.worst_point);
  j["hessian_min_eigenvalue"] = a7.hessian_min_eigenvalue;
  j["scope"] = a7.scope;
  return j;
}

void write_gnuplot_map(const Trace& tr, const fs::path& path) {
  std::ofstream os(path);
  os << "# column indices of trace.csv (gnuplot: plot 'trace.csv' using col_t:col_q1)\n";
  const auto cols = csv_columns(tr);
  for (std::size_t i = 0; i < cols.size(); ++i) os << "col_" << cols[i] << " = " << i + 1 << "\n";
}

double peak_u(const Trace& tr) {
  double p = 0.0;
  for (const auto& u : tr.u) p = std::max(p, u.cwiseAbs().maxCoeff());
  return p;
}

json summarize(const Scenario& sc, const SystemDef<double>& sys, const Trace& tr) {
  json j;
  j["scenario"] = sc.name;
  j["system"] = sc.system;
  j["controller"] = to_string(tr.controller);
  j["mode"] = to_string(tr.gains.mode);
  j["dt"] = tr.dt;
  j["t_end"] = tr.t.back();
  j["samples"] = tr.size();
  j["final_q"] = to_std(tr.q.back());
  j["final_qdot"] = to_std(tr.qd.back());
  j["peak_abs_u"] = peak_u(tr);
  j["min_abs_detK"] = tr.min_abs_detK;
  auto& segs = j["segments"] = json::array();
  for (std::size_t i = 0; i < tr.segments.size(); ++i) {
    const auto& s = tr.segments[i];
    const auto c = detect_convergence(tr, i, tol_q, tol_v, settle_window);
    json sj;
    sj["t_begin"] = s.end > s.begin ? tr.t[s.begin] : 0.0;
    sj["q_star"] = to_std(s.q_star);
    sj["converged"] = c.converged;
    sj["settle_time"] = c.converged ? json(c.settle_time) : json(nullptr);
    segs.push_back(sj);
  }
  auto& pas = j["passivity_relative_residual"];
  if (tr.gains.mode == PotentialMode::cancel_Va) {
    pas["H_u"] = verify_passivity(tr, SupplyPair::u_to_y_u).max_relative;
    pas["H_a"] = verify_passivity(tr, SupplyPair::u_to_y_a).max_relative;
  } else {
    pas["Hbar_u"] = verify_passivity(tr, SupplyPair::tau_to_ybar_u).max_relative;
    pas["Hbar_a"] = verify_passivity(tr, SupplyPair::tau_to_ybar_a).max_relative;
  }
  const auto ly = verify_lyapunov(tr, 1e-8 * tr.dt);
  j["lyapunov"] = {{"rate_relative_residual", ly.rate.max_relative},
                   {"monotone", ly.monotone},
                   {"max_step_increase", ly.max_increase}};
  j["z1_closed_form_deviation"] = z1_closed_form_deviation(sys, tr);
  const auto l2 = verify_L2_gain(tr);
  j["l2"] = {{"applicable", l2.applicable}, {"lhs", l2.lhs},       {"rhs", l2.rhs},
             {"beta3", l2.beta3},           {"min_slack", l2.min_slack}, {"holds", l2.holds}};
  return j;
}

json write_artifacts(const Scenario& sc, const SystemDef<double>& sys, const Trace& tr, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "trace.csv");
    write_csv(tr, os);
  }
  write_gnuplot_map(tr, dir / "columns.gp");
  json summary = summarize(sc, sys, tr);
  std::ofstream(dir / "summary.json") << summary.dump(2) << "\n";
  return summary;
}

int cmd_check(const Overrides& o) {
  const Scenario sc = resolve(o);
  const auto sys = sc.make_system();
  const auto res = run_checks(sc, sys, sc.gains);
  std::cout << res.report.to_text();
  std::cout << "  A5      " << to_string(res.a5.status) << "  min |det K| = " << res.a5.residual << "\n";
  std::cout << "  A7      " << (res.a7.passed ? "pass" : "fail") << "  min eig M_d = " << res.a7.worst_eigenvalue
            << ", Hessian min eig at q* = " << res.a7.hessian_min_eigenvalue << " (" << res.a7.scope << ")\n";
  if (auto w = sign_condition_warning(sc.gains)) std::cout << "  warning: " << *w << "\n";
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    json j = json::parse(res.report.to_json());
    j["A5"] = {{"status", to_string(res.a5.status)}, {"min_abs_detK", res.a5.residual}, {"witness", res.a5.witness}};
    j["A7"] = a7_json(res.a7);
    std::ofstream(fs::path(o.out) / "check.json") << j.dump(2) << "\n";
  }
  return res.ok() ? Exit::ok : Exit::assumption;
}

int cmd_simulate(const Overrides& o) {
  const Scenario sc = resolve(o);
  const auto sys = sc.make_system();
  const Trace tr = simulate(sys, sc.gains, sc.q0, sc.qdot0, sc.make_sim_options());
  const json summary = write_artifacts(sc, sys, tr, sc.output_dir);
  std::cout << summary.dump(2) << "\n";
  return Exit::ok;
}

// Applies one sweep value; matrix gains are scaled by the value.
void apply(Gains<double>& g, const std::string& param, double v) {
  if (param == "k_e") g.k_e = v;
  else if (param == "k_a") g.k_a = v;
  else if (param == "k_u") g.k_u = v;
  else if (param == "K_P") g.K_P *= v;
  else if (param == "K_I") g.K_I *= v;
  else if (param == "K_D") g.K_D *= v;
  else if (param == "a") g.filter_a = v;
  else if (param == "b") g.filter_b = v;
  else throw std::invalid_argument("unknown sweep parameter '" + param + "'");
}

struct SweepRow {
  double value = 0.0;
  std::string status = "ok";
  double settle = std::numeric_limits<double>::quiet_NaN();
  double peak = std::numeric_limits<double>::quiet_NaN();
  double min_detK = std::numeric_limits<double>::quiet_NaN();
  std::string a7 = "-";
  double dissipation = std::numeric_limits<double>::quiet_NaN();  // time average of |y_d|^2_{K_P}
};

SweepRow sweep_one(const Scenario& base, const std::string& param, double v, const fs::path& dir) {
  SweepRow row;
  row.value = v;
  Scenario sc = base;
  try {
    apply(sc.gains, param, v);
    sc.gains.validate(sc.s(), sc.m());
  } catch (const std::invalid_argument& e) {
    row.status = std::string("rejected: ") + e.what();
    return row;
  }
  const auto sys = sc.make_system();
  const auto grid = uniform_grid(sc.check.q_u_lo, sc.check.q_u_hi, sc.check.grid_points);
  const auto a5 = check_A5(sys, sc.gains, grid);
  const auto a7 = check_A7(sys, sc.gains, sc.gains.q_star, grid);
  row.min_detK = a5.residual;
  row.a7 = a7.passed ? "pass" : "fail";
  if (!a5.ok() || !a7.passed) {
    row.status = !a5.ok() ? "A5 violated" : "A7 violated";
    return row;
  }
  try {
    const Trace tr = simulate(sys, sc.gains, sc.q0, sc.qdot0, sc.make_sim_options());
    write_artifacts(sc, sys, tr, dir);
    const auto c = detect_convergence(tr, tol_q, tol_v, settle_window);
    row.status = c.converged ? "converged" : "not converged";
    row.settle = c.converged ? c.settle_time : std::numeric_limits<double>::quiet_NaN();
    row.peak = peak_u(tr);
    row.min_detK = tr.min_abs_detK;
    double acc = 0.0;
    for (std::size_t k = 1; k < tr.size(); ++k) acc += 0.5 * tr.dt * (tr.dissipation[k] + tr.dissipation[k - 1]);
    row.dissipation = acc / tr.t.back();
  } catch (const SingularityError& e) {
    row.status = std::string("singular: ") + e.reason();
  } catch (const SimulationError& e) {
    row.status = "diverged";
  }
  return row;
}

std::string format_value(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const double x = std::stod(item, &used);
    if (used != item.size() && item.find_first_not_of(" \t", used) != std::string::npos)
      throw std::invalid_argument("bad value '" + item + "'");
    v.push_back(x);
  }
  if (v.empty()) throw std::invalid_argument("--values needs at least one number");
  return v;
}

int cmd_sweep(const Overrides& o, const std::string& param, const std::string& values) {
  const Scenario base = resolve(o);
  const auto vals = parse_values(values);
  Gains<double> probe = base.gains;
  apply(probe, param, 1.0);  // rejects unknown parameters before any work starts
  const fs::path root = fs::path(base.output_dir) / ("sweep_" + param);
  std::vector<std::future<SweepRow>> jobs;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const fs::path dir = root / (std::to_string(i) + "_" + param + "=" + format_value(vals[i]));
    jobs.push_back(std::async(std::launch::async, sweep_one, std::cref(base), param, vals[i], dir));
  }
  fs::create_directories(root);
  std::ofstream csv(root / "sweep.csv");
  csv.precision(10);
  csv << "value,status,settle_time,peak_abs_u,min_abs_detK,A7,mean_dissipation\n";
  std::cout << param << "\tstatus\tsettle_s\tpeak|u|\tmin|detK|\tA7\tmean_diss\n";
  for (auto& j : jobs) {
    const SweepRow r = j.get();
    csv << r.value << ",\"" << r.status << "\"," << r.settle << "," << r.peak << "," << r.min_detK << "," << r.a7 << ","
        << r.dissipation << "\n";
    std::cout << r.value << "\t" << r.status << "\t" << r.settle << "\t" << r.peak << "\t" << r.min_detK << "\t" << r.a7
              << "\t" << r.dissipation << "\n";
  }
  return Exit::ok;
}

int reproduce_cart(const Overrides& o) {
  Overrides oo = o;
  oo.scenario = "cart_pendulum";
  const Scenario sc = resolve(oo);
  const auto sys = sc.make_system();
  const Trace tr = simulate(sys, sc.gains, sc.q0, sc.qdot0, sc.make_sim_options());
  const fs::path dir = sc.output_dir;
  write_artifacts(sc, sys, tr, dir);

  const auto results = run_acceptance();
  std::ostringstream report;
  print_acceptance(results, report);
  std::cout << report.str();
  std::ofstream(dir / "acceptance.txt") << report.str();
  bool all = true;
  for (const auto& r : results) all = all && r.passed;
  return all ? Exit::ok : Exit::acceptance;
}

int reproduce_linear(const Overrides& o) {
  Overrides oo = o;
  oo.scenario = "linear_chain";
  const Scenario sc = resolve(oo);
  const auto sys = sc.make_system();
  const auto la = linear_closed_loop(sys, sc.gains);
  const Trace tr = simulate(sys, sc.gains, sc.q0, sc.qdot0, sc.make_sim_options());
  const fs::path dir = sc.output_dir;
  json summary = write_artifacts(sc, sys, tr, dir);
  json lj;
  lj["det_coefficients_ascending"] = la.det_coefficients;
  auto& roots = lj["roots"] = json::array();
  for (const auto& r : la.roots) roots.push_back({r.real(), r.imag()});
  lj["max_real_part"] = la.max_real_part;
  lj["hurwitz"] = la.hurwitz;
  std::ofstream(dir / "linear.json") << lj.dump(2) << "\n";

  const auto conv = detect_convergence(tr, tol_q, tol_v, settle_window);
  std::cout << "hurwitz: " << (la.hurwitz ? "true" : "false") << " (max Re = " << la.max_real_part << ")\n"
            << "converged: " << (conv.converged ? "true" : "false") << " (settle " << conv.settle_time << " s)\n";
  const bool pass = la.hurwitz && conv.converged;
  if (!pass) std::cout << "FAIL: expected a Hurwitz closed loop and a converged trace\n";
  return pass ? Exit::ok : Exit::acceptance;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PID passivity-based control of underactuated mechanical systems"};
  app.require_subcommand(1);
  Overrides o;
  auto add_common = [&](CLI::App* c) {
    c->add_option("--scenario", o.scenario, "scenario file or built-in name (cart_pendulum, cart_pendulum_ku450, linear_chain)");
    c->add_option("--out", o.out, "output directory");
    c->add_option("--dt", o.dt, "integration step [s]")->check(CLI::PositiveNumber);
    c->add_option("--t-end", o.t_end, "final time [s]")->check(CLI::PositiveNumber);
    c->add_option("--controller", o.controller, "controller form")->check(CLI::IsMember({"exact", "approx", "pi"}));
  };
  auto* check = app.add_subcommand("check", "assumption report and A5/A7 scan");
  auto* simulate_cmd = app.add_subcommand("simulate", "simulate a scenario and write trace.csv, summary.json");
  auto* sweep = app.add_subcommand("sweep", "one-parameter gain sweep");
  auto* reproduce = app.add_subcommand("reproduce", "pinned reproduction runs");
  for (auto* c : {check, simulate_cmd, sweep, reproduce}) add_common(c);
  std::string param, values, example;
  sweep->add_option("--param", param, "k_a, k_u, k_e, K_P, K_I, K_D, a or b (matrix gains are scaled)")
      ->required()
      ->check(CLI::IsMember({"k_a", "k_u", "k_e", "K_P", "K_I", "K_D", "a", "b"}));
  sweep->add_option("--values", values, "comma-separated values")->required();
  reproduce->add_option("example", example, "cart_pendulum or linear")
      ->required()
      ->check(CLI::IsMember({"cart_pendulum", "linear"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) return cmd_check(o);
    if (simulate_cmd->parsed()) return cmd_simulate(o);
    if (sweep->parsed()) return cmd_sweep(o, param, values);
    return example == "cart_pendulum" ? reproduce_cart(o) : reproduce_linear(o);
  } catch (const SingularityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Exit::singularity;
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Exit::assumption;
  } catch (const AssumptionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Exit::assumption;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Exit::usage;
  }
}
