#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pidpbc/gains.hpp"
#include "pidpbc/mech_model.hpp"
#include "pidpbc/models.hpp"

namespace pidpbc {

enum class CheckStatus { pass, fail, sampled_pass, not_applicable };

const char* to_string(CheckStatus status);

struct CheckEntry {
  std::string id;
  std::string description;
  CheckStatus status = CheckStatus::not_applicable;
  double residual = 0.0;  // worst-case residual (meaning depends on the check)
  std::vector<double> witness;  // point where the residual is attained
  std::string note;

  bool ok() const { return status == CheckStatus::pass || status == CheckStatus::sampled_pass; }
};

struct AssumptionReport {
  std::string system;
  std::vector<CheckEntry> entries;

  const CheckEntry* find(const std::string& id) const;
  /// True when no entry has status fail.
  bool ok() const;
  std::string to_text() const;
  std::string to_json() const;
};

struct SampleBox {
  Eigen::VectorXd q_u_lo, q_u_hi;
  Eigen::VectorXd q_a_lo, q_a_hi;

  static SampleBox symmetric(int s, int m, double half_width_u, double half_width_a);
};

/// Sampled verification of the structural assumptions of the plant
/// (A1-A4, A6, A8, A9). Failures are reported, never thrown.
AssumptionReport check_assumptions(const SystemDef<double>& sys, const SampleBox& box, int samples = 200,
                                   unsigned seed = 7);

/// Smallest |det K(q_u)| over the grid (A5).
CheckEntry check_A5(const SystemDef<double>& sys, const Gains<double>& gains,
                    const std::vector<Eigen::VectorXd>& q_u_grid, double threshold = 1e-10);

Eigen::MatrixXd desired_inertia_Md(const SystemDef<double>& sys, const Gains<double>& gains,
                                   const Eigen::VectorXd& q_u);

/// V_d(q) = U(q, 0, z1(q)) with z1 the state function placing the
/// equilibrium at q*. In cancel mode this is
///   k_e k_u V_u + 1/2 |k_a (q_a - q_a*) + (k_a - k_u)(V_N(q_u) - V_N(q_u*))|^2_{K_I}.
double desired_potential_Vd(const SystemDef<double>& sys, const Gains<double>& gains, const Eigen::VectorXd& q);
/// Same with an explicit integrator constant kappa (z1 = k_a q_a + (k_a - k_u) V_N(q_u) + kappa).
double desired_potential_Vd(const SystemDef<double>& sys, const Gains<double>& gains, const Eigen::VectorXd& q,
                            const Eigen::VectorXd& kappa);
/// H_d = 1/2 qdot^T M_d qdot + V_d(q) for the given kappa.
double desired_energy_Hd(const SystemDef<double>& sys, const Gains<double>& gains, const State<double>& st,
                         const Eigen::VectorXd& kappa);

struct LyapunovData {
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> M_d;
  std::function<double(const Eigen::VectorXd&)> V_d;
  std::function<double(const State<double>&)> H_d;
  std::function<double(const State<double>&, const Eigen::VectorXd& z1)> U;
  Eigen::VectorXd kappa;
};

LyapunovData lyapunov_Hd_and_U(const SystemDef<double>& sys, const Gains<double>& gains);

/// U(q, qdot, z1) = k_e [k_a H_a + k_u H_u] + 1/2 |y_d|^2_{K_D} + 1/2 |z1|^2_{K_I}
/// (with the storage functions of the uncancelled plant in robust mode).
double lyapunov_U(const SystemDef<double>& sys, const Gains<double>& gains, const State<double>& st,
                  const Eigen::VectorXd& z1);

struct A7Result {
  bool passed = false;
  bool inertia_positive = false;
  bool potential_minimum = false;
  std::vector<double> grid;           // first coordinate of each grid point
  std::vector<double> min_eigenvalue;  // lambda_min(M_d) per grid point
  double worst_eigenvalue = 0.0;
  Eigen::VectorXd worst_point;
  Eigen::VectorXd gradient_at_star;
  Eigen::MatrixXd hessian_at_star;
  double hessian_min_eigenvalue = 0.0;
  std::string scope = "grid-local";
};

A7Result check_A7(const SystemDef<double>& sys, const Gains<double>& gains, const Eigen::VectorXd& q_star,
                  const std::vector<Eigen::VectorXd>& q_u_grid);

/// Uniform grid of n points per axis on [lo, hi] (s-dimensional tensor grid).
std::vector<Eigen::VectorXd> uniform_grid(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int points_per_axis);

struct LinearAnalysis {
  Eigen::MatrixXd A2, A1, A0;        // (A2 s^2 + A1 s + A0) q~ = 0
  std::vector<double> det_coefficients;  // ascending powers
  std::vector<std::complex<double>> roots;
  double max_real_part = 0.0;
  bool hurwitz = false;
};

LinearAnalysis linear_closed_loop(const LinearPlant& plant, const Gains<double>& gains);
/// Same for a SystemDef; throws AssumptionError unless the plant is linear.
LinearAnalysis linear_closed_loop(const SystemDef<double>& sys, const Gains<double>& gains);
/// Extracts (M, S_u, S_a) from a plant with constant inertia and quadratic potentials.
LinearPlant extract_linear_plant(const SystemDef<double>& sys);

/// grad V_u(q_u); q_u belongs to the assignable set when its norm is <= 1e-8.
Eigen::VectorXd assignable_equilibria_residual(const SystemDef<double>& sys, const Eigen::VectorXd& q_u);

// Polynomial utilities (coefficients in ascending powers).

/// det(A2 s^2 + A1 s + A0) by evaluation at 2n+1 roots of unity and inverse DFT.
std::vector<double> determinant_polynomial(const Eigen::MatrixXd& A2, const Eigen::MatrixXd& A1,
                                           const Eigen::MatrixXd& A0);
/// Roots by Aberth-Ehrlich simultaneous iteration.
std::vector<std::complex<double>> polynomial_roots(const std::vector<double>& coefficients);
std::complex<double> polynomial_value(const std::vector<double>& coefficients, std::complex<double> x);

}  // namespace pidpbc
