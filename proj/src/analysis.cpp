#include "pidpbc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "pidpbc/errors.hpp"
#include "pidpbc/passivity.hpp"
#include "pidpbc/pid_pbc.hpp"

namespace pidpbc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(CheckStatus status) {
  switch (status) {
    case CheckStatus::pass:
      return "pass";
    case CheckStatus::fail:
      return "fail";
    case CheckStatus::sampled_pass:
      return "sampled-pass";
    case CheckStatus::not_applicable:
      return "not-applicable";
  }
  return "?";
}

const CheckEntry* AssumptionReport::find(const std::string& id) const {
  for (const auto& e : entries)
    if (e.id == id) return &e;
  return nullptr;
}

bool AssumptionReport::ok() const {
  return std::none_of(entries.begin(), entries.end(), [](const CheckEntry& e) { return e.status == CheckStatus::fail; });
}

namespace {

std::string format_point(const std::vector<double>& p) {
  std::ostringstream os;
  os.precision(10);
  os << "[";
  for (std::size_t i = 0; i < p.size(); ++i) os << (i ? ", " : "") << p[i];
  os << "]";
  return os.str();
}

std::vector<double> to_std(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

std::string AssumptionReport::to_text() const {
  std::ostringstream os;
  os.precision(6);
  os << "assumption report: " << system << "\n";
  for (const auto& e : entries) {
    os << "  " << e.id;
    for (std::size_t pad = e.id.size(); pad < 8; ++pad) os << ' ';
    os << to_string(e.status);
    for (std::size_t pad = std::string(to_string(e.status)).size(); pad < 16; ++pad) os << ' ';
    os << e.description << "  residual=" << e.residual;
    if (!e.witness.empty()) os << "  witness=" << format_point(e.witness);
    if (!e.note.empty()) os << "  (" << e.note << ")";
    os << "\n";
  }
  os << "  overall: " << (ok() ? "ok" : "FAILED") << "\n";
  return os.str();
}

std::string AssumptionReport::to_json() const {
  nlohmann::ordered_json doc;
  doc["system"] = system;
  doc["ok"] = ok();
  auto& arr = doc["checks"] = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["description"] = e.description;
    j["status"] = to_string(e.status);
    j["residual"] = e.residual;
    j["witness"] = e.witness;
    j["note"] = e.note;
    arr.push_back(j);
  }
  return doc.dump(2);
}

SampleBox SampleBox::symmetric(int s, int m, double half_width_u, double half_width_a) {
  return {VectorXd::Constant(s, -half_width_u), VectorXd::Constant(s, half_width_u), VectorXd::Constant(m, -half_width_a),
          VectorXd::Constant(m, half_width_a)};
}

AssumptionReport check_assumptions(const SystemDef<double>& sys, const SampleBox& box, int samples, unsigned seed) {
  const int s = sys.s(), m = sys.m();
  if (box.q_u_lo.size() != s || box.q_u_hi.size() != s || box.q_a_lo.size() != m || box.q_a_hi.size() != m)
    throw std::invalid_argument("check_assumptions: sample box dimensions do not match the system");
  samples = std::max(samples, 100);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&](const VectorXd& lo, const VectorXd& hi) {
    VectorXd x(lo.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = lo(i) + (hi(i) - lo(i)) * unit(rng);
    return x;
  };
  std::vector<VectorXd> qu(samples), qa(samples);
  for (int k = 0; k < samples; ++k) {
    qu[k] = draw(box.q_u_lo, box.q_u_hi);
    qa[k] = draw(box.q_a_lo, box.q_a_hi);
  }

  AssumptionReport rep;
  rep.system = sys.name();
  rep.entries.push_back({"A1", "input matrix G = [0; I] is constant", CheckStatus::pass, 0.0, {}, "by construction"});
  rep.entries.push_back(
      {"A2", "inertia depends only on q_u", CheckStatus::pass, 0.0, {}, "by construction of the inertia callbacks"});
  {
    const double lo = numeric::min_eigenvalue(sys.m_aa());
    std::ostringstream note;
    note << "lambda_min(m_aa) = " << lo;
    rep.entries.push_back({"A3", "m_aa constant and positive definite", CheckStatus::pass, 0.0, {}, note.str()});
  }
  {
    CheckEntry e{"M_pd", "assembled inertia positive definite at samples", CheckStatus::sampled_pass, 0.0, {}, ""};
    double worst = std::numeric_limits<double>::infinity();
    for (int k = 0; k < samples; ++k) {
      const double lo = numeric::min_eigenvalue(assemble_inertia(sys, qu[k]));
      if (lo < worst) {
        worst = lo;
        e.witness = to_std(qu[k]);
      }
    }
    e.residual = worst;
    e.note = "residual = smallest eigenvalue";
    if (!(worst > 0)) e.status = CheckStatus::fail;
    rep.entries.push_back(e);
  }
  rep.entries.push_back({"A4", "potential splits as V_u(q_u) + V_a(q_a)", CheckStatus::pass, 0.0, {},
                         "by construction; lower boundedness of V_u is advisory"});
  {
    CheckEntry e{"A6", "rows of m_aa^{-1} m_au are gradient fields", CheckStatus::sampled_pass, 0.0, {}, ""};
    if (s == 1) {
      e.status = CheckStatus::pass;
      e.note = "s = 1: every row field is a gradient";
    } else {
      for (int k = 0; k < samples; ++k) {
        const double r = integrability_residual(sys, qu[k]);
        if (e.witness.empty() || r > e.residual) {
          e.residual = r;
          e.witness = to_std(qu[k]);
        }
      }
      e.note = "residual = relative asymmetry of the row Jacobians";
      if (e.residual > 1e-6) e.status = CheckStatus::fail;
    }
    rep.entries.push_back(e);
  }
  {
    CheckEntry e{"A8", "actuated potential affine, V_a = s_a^T q_a + c_0", CheckStatus::not_applicable, 0.0, {}, ""};
    if (const auto& aff = sys.affine_V_a()) {
      e.status = CheckStatus::sampled_pass;
      for (int k = 0; k < samples; ++k) {
        const double va = sys.V_a(qa[k]);
        const double r = std::max(std::abs(va - aff->slope.dot(qa[k]) - aff->offset) / (1.0 + std::abs(va)),
                                  (sys.grad_V_a(qa[k]) - aff->slope).cwiseAbs().maxCoeff());
        if (r >= e.residual) {
          e.residual = r;
          e.witness = to_std(qa[k]);
        }
      }
      e.note = "witness is a q_a sample";
      if (e.residual > 1e-9) e.status = CheckStatus::fail;
    } else {
      e.note = "no affine V_a declared";
    }
    rep.entries.push_back(e);
  }
  {
    CheckEntry e{"A9", "strong inertial coupling rank m_au = s, grad V_u injective", CheckStatus::sampled_pass, 0.0, {},
                 ""};
    if (m < s) {
      e.status = CheckStatus::fail;
      e.witness = to_std(qu[0]);
      e.note = "m < s: rank s is impossible";
    } else {
      double worst = std::numeric_limits<double>::infinity();
      double scale = 0.0;
      for (int k = 0; k < samples; ++k) {
        const MatrixXd mau = sys.m_au(qu[k]);
        scale = std::max(scale, assemble_inertia(sys, qu[k]).norm());
        Eigen::JacobiSVD<MatrixXd> svd(mau);
        const double sigma = svd.singularValues()(s - 1);
        if (sigma < worst) {
          worst = sigma;
          e.witness = to_std(qu[k]);
        }
      }
      e.residual = worst;
      std::ostringstream note;
      note << "residual = smallest singular value of m_au";
      if (!(worst > 1e-9 * (1.0 + scale))) {
        e.status = CheckStatus::fail;
        note << "; rank deficient";
      } else {
        std::vector<VectorXd> grads(samples);
        for (int k = 0; k < samples; ++k) grads[k] = sys.grad_V_u(qu[k]);
        for (int i = 0; i < samples && e.status != CheckStatus::fail; ++i)
          for (int j = i + 1; j < samples; ++j)
            if ((grads[i] - grads[j]).norm() <= 1e-9 && (qu[i] - qu[j]).norm() > 1e-9) {
              e.status = CheckStatus::fail;
              e.witness = to_std(qu[i]);
              note << "; grad V_u not injective on samples";
              break;
            }
      }
      e.note = note.str();
    }
    rep.entries.push_back(e);
  }
  return rep;
}

CheckEntry check_A5(const SystemDef<double>& sys, const Gains<double>& gains, const std::vector<VectorXd>& q_u_grid,
                    double threshold) {
  CheckEntry e{"A5", "det K(q_u) bounded away from zero on grid", CheckStatus::sampled_pass, 0.0, {}, ""};
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& q : q_u_grid) {
    double d = 0.0;
    try {
      d = std::abs(wellposedness_matrix_K(sys, gains, q).determinant());
    } catch (const SingularityError&) {
      d = 0.0;
    }
    if (d < worst) {
      worst = d;
      e.witness = to_std(q);
    }
  }
  e.residual = worst;
  e.note = "residual = min |det K|";
  if (!(worst >= threshold)) e.status = CheckStatus::fail;
  return e;
}

MatrixXd desired_inertia_Md(const SystemDef<double>& sys, const Gains<double>& gains, const VectorXd& q_u) {
  const int s = sys.s(), m = sys.m();
  const double ke = gains.k_e, ka = gains.k_a, ku = gains.k_u;
  const MatrixXd mau = sys.m_au(q_u);
  const MatrixXd& Ai = sys.m_aa_inverse();
  const MatrixXd& KD = gains.K_D;
  const MatrixXd AiMau = Ai * mau;
  MatrixXd Md(s + m, s + m);
  Md.topLeftCorner(s, s) = ke * ku * schur_unactuated(sys, q_u) + ke * ka * mau.transpose() * AiMau +
                           (ka - ku) * (ka - ku) * AiMau.transpose() * KD * AiMau;
  Md.topRightCorner(s, m) = ke * ka * mau.transpose() + ka * (ka - ku) * AiMau.transpose() * KD;
  Md.bottomLeftCorner(m, s) = Md.topRightCorner(s, m).transpose();
  Md.bottomRightCorner(m, m) = ke * ka * sys.m_aa() + ka * ka * KD;
  return 0.5 * (Md + Md.transpose());
}

double lyapunov_U(const SystemDef<double>& sys, const Gains<double>& gains, const State<double>& st,
                  const VectorXd& z1) {
  const auto h = storage_functions(sys, st);
  double Ha = h.H_a, Hu = h.H_u;
  if (gains.mode == PotentialMode::robust_A8) {
    const auto r = robust_storage(sys, st);
    Ha = r.Hbar_a;
    Hu = r.Hbar_u;
  }
  const auto y = passive_outputs(sys, st, gains);
  return gains.k_e * (gains.k_a * Ha + gains.k_u * Hu) + 0.5 * y.y_d.dot(gains.K_D * y.y_d) +
         0.5 * z1.dot(gains.K_I * z1);
}

namespace {

VectorXd equilibrium_kappa(const SystemDef<double>& sys, const Gains<double>& gains) {
  return integrator_init(sys, gains, gains.q_star).kappa;
}

double potential_with_kappa(const SystemDef<double>& sys, const Gains<double>& gains, const VectorXd& kappa,
                            const VectorXd& q) {
  const int s = sys.s(), m = sys.m();
  State<double> st{q.head(s), q.tail(m), VectorXd::Zero(s), VectorXd::Zero(m)};
  return lyapunov_U(sys, gains, st, closed_form_z1(sys, gains, st, kappa));
}

}  // namespace

double desired_potential_Vd(const SystemDef<double>& sys, const Gains<double>& gains, const VectorXd& q) {
  if (q.size() != sys.n()) throw std::invalid_argument("desired_potential_Vd: q must have n entries");
  return potential_with_kappa(sys, gains, equilibrium_kappa(sys, gains), q);
}

double desired_potential_Vd(const SystemDef<double>& sys, const Gains<double>& gains, const VectorXd& q,
                            const VectorXd& kappa) {
  if (q.size() != sys.n()) throw std::invalid_argument("desired_potential_Vd: q must have n entries");
  return potential_with_kappa(sys, gains, kappa, q);
}

double desired_energy_Hd(const SystemDef<double>& sys, const Gains<double>& gains, const State<double>& st,
                         const VectorXd& kappa) {
  const VectorXd qd = st.qdot();
  return 0.5 * qd.dot(desired_inertia_Md(sys, gains, st.q_u) * qd) + potential_with_kappa(sys, gains, kappa, st.q());
}

LyapunovData lyapunov_Hd_and_U(const SystemDef<double>& sys, const Gains<double>& gains) {
  LyapunovData L;
  L.kappa = equilibrium_kappa(sys, gains);
  const VectorXd kappa = L.kappa;
  L.M_d = [&sys, gains](const VectorXd& q_u) { return desired_inertia_Md(sys, gains, q_u); };
  L.V_d = [&sys, gains, kappa](const VectorXd& q) { return potential_with_kappa(sys, gains, kappa, q); };
  L.H_d = [&sys, gains, kappa](const State<double>& st) { return desired_energy_Hd(sys, gains, st, kappa); };
  L.U = [&sys, gains](const State<double>& st, const VectorXd& z1) { return lyapunov_U(sys, gains, st, z1); };
  return L;
}

std::vector<VectorXd> uniform_grid(const VectorXd& lo, const VectorXd& hi, int points_per_axis) {
  const Eigen::Index dim = lo.size();
  points_per_axis = std::max(points_per_axis, 2);
  std::vector<VectorXd> grid;
  std::vector<int> idx(dim, 0);
  while (true) {
    VectorXd p(dim);
    for (Eigen::Index i = 0; i < dim; ++i) p(i) = lo(i) + (hi(i) - lo(i)) * idx[i] / (points_per_axis - 1.0);
    grid.push_back(p);
    Eigen::Index k = 0;
    while (k < dim && ++idx[k] == points_per_axis) idx[k++] = 0;
    if (k == dim) break;
  }
  return grid;
}

A7Result check_A7(const SystemDef<double>& sys, const Gains<double>& gains, const VectorXd& q_star,
                  const std::vector<VectorXd>& q_u_grid) {
  Gains<double> g = gains;
  g.q_star = q_star;
  A7Result r;
  r.worst_eigenvalue = std::numeric_limits<double>::infinity();
  for (const auto& q : q_u_grid) {
    const double lo = numeric::min_eigenvalue(desired_inertia_Md(sys, g, q));
    r.grid.push_back(q(0));
    r.min_eigenvalue.push_back(lo);
    if (lo < r.worst_eigenvalue) {
      r.worst_eigenvalue = lo;
      r.worst_point = q;
    }
  }
  r.inertia_positive = !q_u_grid.empty() && r.worst_eigenvalue > 0;
  const VectorXd kappa = equilibrium_kappa(sys, g);
  auto Vd = [&](const VectorXd& q) { return potential_with_kappa(sys, g, kappa, q); };
  const double h = 1e-5;
  r.gradient_at_star = numeric::gradient(Vd, q_star, h);
  r.hessian_at_star = numeric::hessian(Vd, q_star, h);
  r.hessian_min_eigenvalue = numeric::min_eigenvalue(0.5 * (r.hessian_at_star + r.hessian_at_star.transpose()));
  const double grad_tol = 1e-6 * std::max(1.0, r.hessian_at_star.cwiseAbs().maxCoeff());
  r.potential_minimum = r.gradient_at_star.cwiseAbs().maxCoeff() <= grad_tol && r.hessian_min_eigenvalue > 0;
  r.passed = r.inertia_positive && r.potential_minimum;
  return r;
}

LinearAnalysis linear_closed_loop(const LinearPlant& plant, const Gains<double>& gains) {
  const int n = static_cast<int>(plant.M.rows()), s = plant.s, m = n - s;
  gains.validate(s, m);
  const MatrixXd muu = plant.M.topLeftCorner(s, s), mau = plant.M.bottomLeftCorner(m, s);
  const MatrixXd maa = plant.M.bottomRightCorner(m, m);
  const double ke = gains.k_e, ka = gains.k_a, ku = gains.k_u;
  const MatrixXd m0 = (ka - ku) * maa.llt().solve(mau);
  LinearAnalysis la;
  la.A2 = MatrixXd::Zero(n, n);
  la.A1 = MatrixXd::Zero(n, n);
  la.A0 = MatrixXd::Zero(n, n);
  la.A2.topLeftCorner(s, s) = muu;
  la.A2.topRightCorner(s, m) = mau.transpose();
  la.A2.bottomLeftCorner(m, s) = mau + gains.K_D * m0 / ke;
  la.A2.bottomRightCorner(m, m) = maa + ka * gains.K_D / ke;
  la.A1.bottomLeftCorner(m, s) = gains.K_P * m0 / ke;
  la.A1.bottomRightCorner(m, m) = ka * gains.K_P / ke;
  la.A0.topLeftCorner(s, s) = plant.S_u;
  la.A0.bottomLeftCorner(m, s) = gains.K_I * m0 / ke;
  la.A0.bottomRightCorner(m, m) = ka * gains.K_I / ke;
  la.det_coefficients = determinant_polynomial(la.A2, la.A1, la.A0);
  la.roots = polynomial_roots(la.det_coefficients);
  la.max_real_part = -std::numeric_limits<double>::infinity();
  for (const auto& z : la.roots) la.max_real_part = std::max(la.max_real_part, z.real());
  la.hurwitz = !la.roots.empty() && la.max_real_part < 0;
  return la;
}

LinearPlant extract_linear_plant(const SystemDef<double>& sys) {
  const int s = sys.s(), m = sys.m();
  const VectorXd zu = VectorXd::Zero(s);
  LinearPlant p;
  p.s = s;
  p.M = assemble_inertia(sys, zu);
  auto linear_map = [](const std::function<VectorXd(const VectorXd&)>& f, int dim) {
    MatrixXd A(dim, dim);
    const VectorXd f0 = f(VectorXd::Zero(dim));
    for (int k = 0; k < dim; ++k) A.col(k) = f(VectorXd::Unit(dim, k)) - f0;
    return std::make_pair(A, f0);
  };
  const auto [Su, gu0] = linear_map([&](const VectorXd& q) { return sys.grad_V_u(q); }, s);
  const auto [Sa, ga0] = linear_map([&](const VectorXd& q) { return sys.grad_V_a(q); }, m);
  if (gu0.norm() > 1e-12) throw AssumptionError("linear_closed_loop: grad V_u(0) must vanish for a linear plant");
  p.S_u = Su;
  p.S_a = Sa;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  const double scale = 1.0 + p.M.cwiseAbs().maxCoeff();
  for (int trial = 0; trial < 8; ++trial) {
    VectorXd xu(s), xa(m);
    for (int i = 0; i < s; ++i) xu(i) = U(rng);
    for (int i = 0; i < m; ++i) xa(i) = U(rng);
    if ((assemble_inertia(sys, xu) - p.M).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw AssumptionError("linear_closed_loop: inertia is not constant");
    if ((sys.grad_V_u(xu) - Su * xu).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + Su.cwiseAbs().maxCoeff()))
      throw AssumptionError("linear_closed_loop: V_u is not quadratic");
    if ((sys.grad_V_a(xa) - ga0 - Sa * xa).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + Sa.cwiseAbs().maxCoeff()))
      throw AssumptionError("linear_closed_loop: V_a is not quadratic");
  }
  return p;
}

LinearAnalysis linear_closed_loop(const SystemDef<double>& sys, const Gains<double>& gains) {
  return linear_closed_loop(extract_linear_plant(sys), gains);
}

VectorXd assignable_equilibria_residual(const SystemDef<double>& sys, const VectorXd& q_u) { return sys.grad_V_u(q_u); }

}  // namespace pidpbc
