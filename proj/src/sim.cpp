#include "pidpbc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "pidpbc/analysis.hpp"
#include "pidpbc/errors.hpp"
#include "pidpbc/passivity.hpp"
#include "pidpbc/pid_pbc.hpp"

namespace pidpbc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(ControllerForm form) {
  switch (form) {
    case ControllerForm::exact:
      return "exact";
    case ControllerForm::approx:
      return "approx";
    case ControllerForm::pi_only:
      return "pi";
  }
  return "?";
}

ControllerForm controller_form_from_string(const std::string& name) {
  if (name == "exact") return ControllerForm::exact;
  if (name == "approx") return ControllerForm::approx;
  if (name == "pi" || name == "pi_only") return ControllerForm::pi_only;
  throw std::invalid_argument("unknown controller form '" + name + "' (expected exact, approx or pi)");
}

const char* to_string(SupplyPair which) {
  switch (which) {
    case SupplyPair::u_to_y_u:
      return "u->y_u";
    case SupplyPair::u_to_y_a:
      return "u->y_a";
    case SupplyPair::tau_to_ybar_u:
      return "tau->ybar_u";
    case SupplyPair::tau_to_ybar_a:
      return "tau->ybar_a";
  }
  return "?";
}

std::size_t Trace::segment_of(std::size_t k) const {
  for (std::size_t i = 0; i < segments.size(); ++i)
    if (k >= segments[i].begin && k < segments[i].end) return i;
  throw std::out_of_range("Trace::segment_of: sample outside every segment");
}

namespace {

struct Layout {
  int s, m;
  bool filter;
  int size() const { return 2 * (s + m) + m + (filter ? m : 0); }
};

State<double> unpack_state(const Layout& L, const VectorXd& X) {
  return {X.segment(0, L.s), X.segment(L.s, L.m), X.segment(L.s + L.m, L.s), X.segment(2 * L.s + L.m, L.m)};
}

ControllerState<double> unpack_controller(const Layout& L, const VectorXd& X) {
  ControllerState<double> cs;
  cs.z1 = X.segment(2 * (L.s + L.m), L.m);
  if (L.filter) cs.z2 = X.segment(2 * (L.s + L.m) + L.m, L.m);
  return cs;
}

ControlOutput<double> control(const SystemDef<double>& sys, const Gains<double>& gains, ControllerForm form,
                              const State<double>& st, const ControllerState<double>& cs, double det_threshold) {
  switch (form) {
    case ControllerForm::exact:
      return exact_control(sys, gains, st, cs, det_threshold);
    case ControllerForm::approx:
      return approx_control(sys, gains, st, cs);
    case ControllerForm::pi_only:
      return pi_control(sys, gains, st, cs);
  }
  throw std::logic_error("control: unknown form");
}

VectorXd field(const SystemDef<double>& sys, const Gains<double>& gains, ControllerForm form, const Layout& L,
               const VectorXd& X, const VectorXd& d, double det_threshold) {
  if (!X.allFinite()) throw SimulationError("closed-loop state became non-finite", -1.0);
  const auto st = unpack_state(L, X);
  const auto cs = unpack_controller(L, X);
  const auto out = control(sys, gains, form, st, cs, det_threshold);
  const VectorXd tau = plant_input(sys, gains, st.q_a, VectorXd(out.u + d));
  const VectorXd qdd = forward_dynamics(sys, st, tau);
  VectorXd Xd(L.size());
  Xd.segment(0, L.s + L.m) = X.segment(L.s + L.m, L.s + L.m);
  Xd.segment(L.s + L.m, L.s + L.m) = qdd;
  Xd.segment(2 * (L.s + L.m), L.m) = out.z1dot;
  if (L.filter) Xd.segment(2 * (L.s + L.m) + L.m, L.m) = out.z2dot;
  return Xd;
}

// Five-point central difference of f at interior samples of each segment.
template <typename Rate>
RateResidual rate_residual(const Trace& tr, const std::vector<double>& f, Rate&& power) {
  RateResidual r;
  for (const auto& seg : tr.segments) {
    if (seg.end < seg.begin + 5) continue;
    for (std::size_t k = seg.begin + 2; k + 2 < seg.end; ++k) {
      const double fd = (-f[k + 2] + 8.0 * f[k + 1] - 8.0 * f[k - 1] + f[k - 2]) / (12.0 * tr.dt);
      const double p = power(k);
      r.max_absolute = std::max(r.max_absolute, std::abs(fd - p));
      r.max_power = std::max(r.max_power, std::abs(p));
      ++r.stencils;
    }
  }
  r.max_relative = r.max_power > 0 ? r.max_absolute / r.max_power : r.max_absolute;
  return r;
}

double max_entry(const VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

VectorXd closed_loop_field(const SystemDef<double>& sys, const Gains<double>& gains, ControllerForm form,
                           const VectorXd& X, const VectorXd& d, double det_threshold) {
  const Layout L{sys.s(), sys.m(), form == ControllerForm::approx};
  if (X.size() != L.size()) throw std::invalid_argument("closed_loop_field: state has wrong dimension");
  return field(sys, gains, form, L, X, d.size() ? d : VectorXd(VectorXd::Zero(L.m)), det_threshold);
}

Trace simulate(const SystemDef<double>& sys, const Gains<double>& gains_in, const VectorXd& q0, const VectorXd& qdot0,
               const SimOptions& opt) {
  const int s = sys.s(), m = sys.m(), n = s + m;
  if (q0.size() != n || qdot0.size() != n) throw std::invalid_argument("simulate: q0 and qdot0 must have n entries");
  if (!(opt.dt > 0) || !(opt.t_end >= 0)) throw std::invalid_argument("simulate: need dt > 0 and t_end >= 0");
  gains_in.validate(s, m);
  Gains<double> gains = gains_in;
  if (opt.controller == ControllerForm::pi_only) gains.K_D = MatrixXd::Zero(m, m);
  const Layout L{s, m, opt.controller == ControllerForm::approx};

  std::vector<SetpointChange> schedule = opt.setpoints;
  std::stable_sort(schedule.begin(), schedule.end(),
                   [](const SetpointChange& a, const SetpointChange& b) { return a.time < b.time; });
  for (const auto& sp : schedule)
    if (sp.q_star.size() != n) throw std::invalid_argument("simulate: setpoint q_star must have n entries");

  auto disturbance = [&](double t) -> VectorXd {
    if (!opt.disturbance) return VectorXd::Zero(m);
    VectorXd d = opt.disturbance(t);
    if (d.size() != m) throw std::invalid_argument("simulate: disturbance must return m entries");
    return d;
  };

  VectorXd X(L.size());
  X << q0, qdot0, VectorXd::Zero(m), VectorXd::Zero(L.filter ? m : 0);
  auto init = integrator_init(sys, gains, q0);
  X.segment(2 * n, m) = init.z1_0;
  if (L.filter) {
    const auto st = unpack_state(L, X);
    X.segment(2 * n + m, m) = passive_outputs(sys, st, gains).y_d;
  }

  Trace tr;
  tr.s = s;
  tr.m = m;
  tr.dt = opt.dt;
  tr.controller = opt.controller;
  tr.gains = gains;
  tr.min_abs_detK = std::numeric_limits<double>::infinity();
  tr.segments.push_back({0, 0, gains.q_star, init.kappa});

  const auto steps = static_cast<std::size_t>(std::llround(opt.t_end / opt.dt));
  tr.t.reserve(steps + 1);

  const bool has_affine = static_cast<bool>(sys.affine_V_a());
  std::size_t next_sp = 0;
  double t = 0.0;
  try {
    for (std::size_t k = 0;; ++k) {
      t = static_cast<double>(k) * opt.dt;
      while (next_sp < schedule.size() && t >= schedule[next_sp].time - 0.5 * opt.dt) {
        gains.q_star = schedule[next_sp].q_star;
        VectorXd kappa = tr.segments.back().kappa;
        if (opt.reinit_on_setpoint) {
          init = integrator_init(sys, gains, VectorXd(X.head(n)));
          X.segment(2 * n, m) = init.z1_0;
          kappa = init.kappa;
        }
        tr.segments.back().end = k;
        if (tr.segments.back().begin == k) tr.segments.pop_back();
        tr.segments.push_back({k, k, gains.q_star, kappa});
        ++next_sp;
      }

      // Record sample k.
      const auto st = unpack_state(L, X);
      const auto cs = unpack_controller(L, X);
      const auto out = control(sys, gains, opt.controller, st, cs, opt.det_threshold);
      const VectorXd d = disturbance(t);
      const VectorXd tau = plant_input(sys, gains, st.q_a, VectorXd(out.u + d));
      const auto y = passive_outputs(sys, st, gains);
      const auto h = storage_functions(sys, st);
      const MatrixXd K = wellposedness_matrix_K(sys, gains, st.q_u);
      const double detK = K.determinant();
      tr.t.push_back(t);
      tr.q.push_back(st.q());
      tr.qd.push_back(st.qdot());
      tr.z1.push_back(cs.z1);
      tr.z2.push_back(L.filter ? cs.z2 : VectorXd());
      tr.u.push_back(out.u);
      tr.tau.push_back(tau);
      tr.u_inner.push_back(tau - sys.grad_V_a(st.q_a));
      tr.y_u.push_back(y.y_u);
      tr.y_a.push_back(y.y_a);
      tr.y_d.push_back(y.y_d);
      tr.d.push_back(d);
      tr.H_u.push_back(h.H_u);
      tr.H_a.push_back(h.H_a);
      if (has_affine) {
        const auto hb = robust_storage(sys, st);
        tr.Hbar_u.push_back(hb.Hbar_u);
        tr.Hbar_a.push_back(hb.Hbar_a);
      } else {
        tr.Hbar_u.push_back(std::numeric_limits<double>::quiet_NaN());
        tr.Hbar_a.push_back(std::numeric_limits<double>::quiet_NaN());
      }
      tr.U.push_back(lyapunov_U(sys, gains, st, cs.z1));
      tr.H_d.push_back(desired_energy_Hd(sys, gains, st, tr.segments.back().kappa));
      tr.detK.push_back(detK);
      tr.dissipation.push_back(y.y_d.dot(gains.K_P * y.y_d));
      tr.disturbance_power.push_back(y.y_d.dot(K * d));
      tr.min_abs_detK = std::min(tr.min_abs_detK, std::abs(detK));
      tr.segments.back().end = k + 1;

      if (k == steps) break;

      const double dt = opt.dt;
      const VectorXd k1 = field(sys, gains, opt.controller, L, X, d, opt.det_threshold);
      const VectorXd dm = disturbance(t + 0.5 * dt);
      const VectorXd k2 = field(sys, gains, opt.controller, L, X + 0.5 * dt * k1, dm, opt.det_threshold);
      const VectorXd k3 = field(sys, gains, opt.controller, L, X + 0.5 * dt * k2, dm, opt.det_threshold);
      const VectorXd k4 = field(sys, gains, opt.controller, L, X + dt * k3, disturbance(t + dt), opt.det_threshold);
      X += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!X.allFinite()) throw SimulationError("closed-loop state became non-finite", t + dt);
    }
  } catch (const SingularityError& e) {
    throw SingularityError(e.reason(), X.head(s), t);
  } catch (const SimulationError& e) {
    throw SimulationError(std::string(e.what()) + " at t = " + std::to_string(t), t);
  }
  return tr;
}

RateResidual verify_passivity(const Trace& tr, SupplyPair which) {
  switch (which) {
    case SupplyPair::u_to_y_u:
      return rate_residual(tr, tr.H_u, [&](std::size_t k) { return tr.u_inner[k].dot(tr.y_u[k]); });
    case SupplyPair::u_to_y_a:
      return rate_residual(tr, tr.H_a, [&](std::size_t k) { return tr.u_inner[k].dot(tr.y_a[k]); });
    case SupplyPair::tau_to_ybar_u:
      return rate_residual(tr, tr.Hbar_u, [&](std::size_t k) { return tr.tau[k].dot(tr.y_u[k]); });
    case SupplyPair::tau_to_ybar_a:
      return rate_residual(tr, tr.Hbar_a, [&](std::size_t k) { return tr.tau[k].dot(tr.y_a[k]); });
  }
  throw std::logic_error("verify_passivity: unknown pair");
}

LyapunovCheck verify_lyapunov(const Trace& tr, double tol) {
  LyapunovCheck c;
  c.rate = rate_residual(tr, tr.U, [&](std::size_t k) { return -tr.dissipation[k] + tr.disturbance_power[k]; });
  c.max_increase = -std::numeric_limits<double>::infinity();
  for (const auto& seg : tr.segments)
    for (std::size_t k = seg.begin; k + 1 < seg.end; ++k) c.max_increase = std::max(c.max_increase, tr.U[k + 1] - tr.U[k]);
  if (!std::isfinite(c.max_increase)) c.max_increase = 0.0;
  c.monotone = c.max_increase <= tol;
  return c;
}

L2Check verify_L2_gain(const Trace& tr, double early_fraction) {
  L2Check c;
  c.applicable = tr.gains.sign_condition();
  if (!c.applicable || tr.size() == 0) return c;
  const double lambda = numeric::min_eigenvalue(tr.gains.K_P);
  const std::size_t N = tr.size();
  std::vector<double> gap(N, 0.0);
  double Iy = 0.0, Id = 0.0;
  for (std::size_t k = 1; k < N; ++k) {
    Iy += 0.5 * tr.dt * (tr.y_d[k].squaredNorm() + tr.y_d[k - 1].squaredNorm());
    Id += 0.5 * tr.dt * (tr.d[k].squaredNorm() + tr.d[k - 1].squaredNorm());
    gap[k] = Iy - Id / lambda;
  }
  const auto early = std::max<std::size_t>(1, static_cast<std::size_t>(early_fraction * static_cast<double>(N)));
  c.beta3 = *std::max_element(gap.begin(), gap.begin() + std::min(early, N));
  c.lhs = Iy;
  c.rhs = Id / lambda + c.beta3;
  c.min_slack = std::numeric_limits<double>::infinity();
  for (double g : gap) c.min_slack = std::min(c.min_slack, c.beta3 - g);
  c.holds = c.min_slack >= -1e-12 * (1.0 + std::abs(c.beta3));
  return c;
}

Convergence detect_convergence(const Trace& tr, std::size_t segment, double tol_q, double tol_v, double window) {
  Convergence c;
  if (segment >= tr.segments.size()) throw std::out_of_range("detect_convergence: no such segment");
  const auto& seg = tr.segments[segment];
  if (seg.end <= seg.begin) return c;
  std::size_t settle = seg.end;
  for (std::size_t k = seg.end; k-- > seg.begin;) {
    const bool ok = max_entry(tr.q[k] - seg.q_star) <= tol_q && tr.qd[k].norm() <= tol_v;
    if (!ok) break;
    settle = k;
  }
  if (settle == seg.end) return c;
  const double t_last = tr.t[seg.end - 1];
  c.settle_time = tr.t[settle];
  c.converged = t_last - c.settle_time >= window - 1e-12;
  return c;
}

Convergence detect_convergence(const Trace& tr, double tol_q, double tol_v, double window) {
  if (tr.segments.empty()) return {};
  return detect_convergence(tr, tr.segments.size() - 1, tol_q, tol_v, window);
}

double z1_closed_form_deviation(const SystemDef<double>& sys, const Trace& tr) {
  double worst = 0.0;
  for (const auto& seg : tr.segments)
    for (std::size_t k = seg.begin; k < seg.end; ++k) {
      const VectorXd cf = tr.gains.k_a * tr.q[k].tail(tr.m) +
                          (tr.gains.k_a - tr.gains.k_u) * potential_integral_VN(sys, VectorXd(tr.q[k].head(tr.s))) +
                          seg.kappa;
      worst = std::max(worst, max_entry(tr.z1[k] - cf));
    }
  return worst;
}

double open_loop_energy_drift(const SystemDef<double>& sys, const VectorXd& q0, const VectorXd& qdot0, double t_end,
                              double dt) {
  const int s = sys.s(), m = sys.m(), n = s + m;
  auto energy = [&](const VectorXd& x) {
    const auto st = State<double>::from_stacked(x.head(n), x.tail(n), s);
    const VectorXd qd = st.qdot();
    return 0.5 * qd.dot(assemble_inertia(sys, st.q_u) * qd) + sys.V_u(st.q_u) + sys.V_a(st.q_a);
  };
  auto rate = [&](const VectorXd& x) {
    const auto st = State<double>::from_stacked(x.head(n), x.tail(n), s);
    VectorXd xd(2 * n);
    xd << x.tail(n), forward_dynamics(sys, st, VectorXd(VectorXd::Zero(m)));
    return xd;
  };
  VectorXd x(2 * n);
  x << q0, qdot0;
  const double E0 = energy(x);
  double drift = 0.0;
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  for (std::size_t k = 0; k < steps; ++k) {
    const VectorXd k1 = rate(x), k2 = rate(x + 0.5 * dt * k1), k3 = rate(x + 0.5 * dt * k2), k4 = rate(x + dt * k3);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    drift = std::max(drift, std::abs(energy(x) - E0));
  }
  return drift;
}

std::vector<std::string> csv_columns(const Trace& tr) {
  const int n = tr.s + tr.m;
  std::vector<std::string> cols{"t"};
  auto add = [&](const std::string& base, int count) {
    for (int i = 1; i <= count; ++i) cols.push_back(base + std::to_string(i));
  };
  add("q", n);
  add("qd", n);
  add("z1_", tr.m);
  add("u", tr.m);
  add("y_u", tr.m);
  add("y_a", tr.m);
  add("y_d", tr.m);
  for (const char* c : {"H_u", "H_a", "H_d", "U", "detK"}) cols.push_back(c);
  add("d", tr.m);
  return cols;
}

void write_csv(const Trace& tr, std::ostream& os) {
  const auto cols = csv_columns(tr);
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
  const auto old_precision = os.precision(17);
  auto put = [&](const VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) os << ',' << v(i);
  };
  for (std::size_t k = 0; k < tr.size(); ++k) {
    os << tr.t[k];
    put(tr.q[k]);
    put(tr.qd[k]);
    put(tr.z1[k]);
    put(tr.u[k]);
    put(tr.y_u[k]);
    put(tr.y_a[k]);
    put(tr.y_d[k]);
    os << ',' << tr.H_u[k] << ',' << tr.H_a[k] << ',' << tr.H_d[k] << ',' << tr.U[k] << ',' << tr.detK[k];
    put(tr.d[k]);
    os << "\n";
  }
  os.precision(old_precision);
}

}  // namespace pidpbc
