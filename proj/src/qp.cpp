#include "amod/qp.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace amod {

int QpProblem::add_var(double lower, double upper, double cost, double quad) {
  if (!std::isfinite(lower)) throw std::invalid_argument("lower bound must be finite");
  if (upper < lower) throw std::invalid_argument("empty variable bounds");
  if (quad < 0) throw std::invalid_argument("quadratic term must be convex");
  cost_.push_back(cost);
  quad_.push_back(quad);
  lower_.push_back(lower);
  upper_.push_back(upper);
  return num_vars() - 1;
}

int QpProblem::add_row(double rhs) {
  rhs_.push_back(rhs);
  return num_rows() - 1;
}

void QpProblem::add_coef(int row, int var, double value) {
  if (value != 0.0) entries_.push_back({row, var, value});
}

void QpProblem::set_bounds(int var, double lower, double upper) {
  if (!std::isfinite(lower) || upper < lower) {
    throw std::invalid_argument("bad variable bounds");
  }
  lower_[var] = lower;
  upper_[var] = upper;
}

double QpProblem::objective(const std::vector<double>& x) const {
  double f = 0.0;
  for (int k = 0; k < num_vars(); ++k) {
    f += 0.5 * quad_[k] * x[k] * x[k] + cost_[k] * x[k];
  }
  return f;
}

std::string to_string(QpStatus status) {
  switch (status) {
    case QpStatus::kOptimal: return "optimal";
    case QpStatus::kMaxIterations: return "max-iterations";
    case QpStatus::kNumericalFailure: return "numerical-failure";
    case QpStatus::kInfeasible: return "infeasible";
  }
  return "unknown";
}

namespace {

using Eigen::ArrayXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

double max_step(const ArrayXd& val, const ArrayXd& step) {
  double alpha = 1.0;
  for (Eigen::Index k = 0; k < val.size(); ++k) {
    if (step[k] < 0) alpha = std::min(alpha, -val[k] / step[k]);
  }
  return alpha;
}

double inf_norm(const VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

}  // namespace

QpSolution solve_qp(const QpProblem& prob, const QpOptions& opt) {
  const int total_vars = prob.num_vars();
  const int total_rows = prob.num_rows();
  const auto& lo = prob.lower();
  const auto& up = prob.upper();
  const auto& qd = prob.quad();
  const auto& cs = prob.cost();

  // Presolve: drop fixed columns and the rows they empty.
  std::vector<int> col(total_vars, -1);
  int n = 0;
  for (int j = 0; j < total_vars; ++j) {
    const bool fixed = up[j] - lo[j] <= 1e-13 * (1.0 + std::abs(lo[j]));
    if (!fixed) col[j] = n++;
  }
  std::vector<double> rhs = prob.rhs();
  std::vector<int> free_entries(total_rows, 0);
  for (const auto& e : prob.entries()) {
    rhs[e.row] -= e.value * lo[e.var];
    if (col[e.var] >= 0) ++free_entries[e.row];
  }
  double rhs_scale = 1.0;
  for (double b : prob.rhs()) rhs_scale = std::max(rhs_scale, std::abs(b));

  QpSolution sol;
  std::vector<int> row(total_rows, -1);
  int m = 0;
  for (int i = 0; i < total_rows; ++i) {
    if (free_entries[i] > 0) {
      row[i] = m++;
    } else if (std::abs(rhs[i]) > 1e-9 * rhs_scale) {
      sol.status = QpStatus::kInfeasible;
      return sol;
    }
  }

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(prob.entries().size());
  for (const auto& e : prob.entries()) {
    if (col[e.var] >= 0) trip.emplace_back(row[e.row], col[e.var], e.value);
  }
  SpMat A(m, n);
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();
  const SpMat At = A.transpose();
  const SpMat A_abs = A.cwiseAbs();
  const SpMat At_abs = At.cwiseAbs();

  VectorXd b(m), c(n), h(n), ub(n);
  ArrayXd has_ub = ArrayXd::Zero(n);
  for (int i = 0; i < total_rows; ++i) {
    if (row[i] >= 0) b[row[i]] = rhs[i];
  }
  for (int j = 0; j < total_vars; ++j) {
    const int k = col[j];
    if (k < 0) continue;
    h[k] = qd[j];
    c[k] = cs[j] + qd[j] * lo[j];
    if (std::isfinite(up[j])) {
      has_ub[k] = 1.0;
      ub[k] = up[j] - lo[j];
    } else {
      ub[k] = 0.0;
    }
  }
  const bool is_lp = n == 0 || h.cwiseAbs().maxCoeff() == 0.0;
  const int n_ub = static_cast<int>(has_ub.sum());

  ArrayXd x = ArrayXd::Ones(n);
  ArrayXd z = ArrayXd::Ones(n);
  ArrayXd w = ArrayXd::Zero(n);
  ArrayXd v = ArrayXd::Zero(n);
  VectorXd y = VectorXd::Zero(m);
  for (int k = 0; k < n; ++k) {
    if (has_ub[k] > 0) {
      x[k] = std::min(1.0, 0.5 * ub[k]);
      w[k] = ub[k] - x[k];
      v[k] = 1.0;
    }
  }

  const double b_norm = inf_norm(b);
  const double c_norm = inf_norm(c);
  double ub_norm = 0.0;
  for (int k = 0; k < n; ++k) {
    if (has_ub[k] > 0) ub_norm = std::max(ub_norm, ub[k]);
  }
  const double n_comp = std::max(1, n + n_ub);

  Eigen::SimplicialLDLT<SpMat> ldlt;
  bool analyzed = false;
  sol.status = QpStatus::kMaxIterations;

  int it = 0;
  for (; it < opt.max_iterations && n > 0; ++it) {
    const VectorXd xv = x.matrix();
    const VectorXd rp = b - A * xv;
    const VectorXd rd =
        (c.array() + h.array() * x - z + v * has_ub).matrix() - At * y;
    const ArrayXd ru = (ub.array() - x - w) * has_ub;
    const double comp = (x * z).sum() + (w * v * has_ub).sum();
    const double mu = comp / n_comp;
    const double pobj = 0.5 * (h.array() * x * x).sum() + c.dot(xv);

    // Scaled by the magnitude of the terms that must cancel.
    const double ax_norm = inf_norm(A_abs * x.matrix());
    const double aty_norm = inf_norm(At_abs * y.cwiseAbs());
    sol.primal_residual =
        std::max(inf_norm(rp) / (1.0 + std::max(b_norm, ax_norm)),
                 inf_norm(ru.matrix()) / (1.0 + ub_norm));
    sol.dual_residual = inf_norm(rd) / (1.0 + std::max(c_norm, aty_norm));
    if (sol.primal_residual <= opt.tolerance &&
        sol.dual_residual <= opt.tolerance &&
        comp / (1.0 + std::abs(pobj)) <= opt.tolerance) {
      sol.status = QpStatus::kOptimal;
      break;
    }

    ArrayXd theta_inv = h.array() + z / x;
    for (int k = 0; k < n; ++k) {
      if (has_ub[k] > 0) theta_inv[k] += v[k] / w[k];
    }
    // Small proximal and dual regularization keep the factorization stable
    // once complementarity drives theta to extreme values.
    const ArrayXd theta = (theta_inv + 1e-10).inverse();
    SpMat normal = A * theta.matrix().asDiagonal() * At;
    SpMat eye(m, m);
    eye.setIdentity();
    // Redundant rows make the normal matrix singular; raise the dual
    // regularization until the factorization goes through.
    double max_diag = 0.0;
    for (int r = 0; r < m; ++r) max_diag = std::max(max_diag, normal.coeff(r, r));
    bool factored = false;
    for (double reg = 1e-10; reg <= 1e-4 * (1.0 + max_diag); reg *= 100.0) {
      SpMat normal_reg = normal + reg * eye;
      if (!analyzed) {
        ldlt.analyzePattern(normal_reg);
        analyzed = true;
      }
      ldlt.factorize(normal_reg);
      if (ldlt.info() == Eigen::Success) {
        factored = true;
        break;
      }
    }
    if (!factored) {
      sol.status = QpStatus::kNumericalFailure;
      break;
    }

    auto solve_normal = [&](const VectorXd& r) {
      VectorXd dy = ldlt.solve(r);
      for (int pass = 0; pass < 2; ++pass) {
        const VectorXd res = r - normal * dy;
        dy += ldlt.solve(res);
      }
      return dy;
    };

    struct Step {
      ArrayXd dx, dz, dw, dv;
      VectorXd dy;
    };
    auto newton = [&](const ArrayXd& r_xz, const ArrayXd& r_wv) {
      ArrayXd rhat = -rd.array() + r_xz / x;
      for (int k = 0; k < n; ++k) {
        if (has_ub[k] > 0) rhat[k] -= (r_wv[k] - v[k] * ru[k]) / w[k];
      }
      Step s;
      const VectorXd ry = rp - A * (theta * rhat).matrix();
      s.dy = solve_normal(ry);
      s.dx = theta * (rhat + (At * s.dy).array());
      s.dz = (r_xz - z * s.dx) / x;
      s.dw = (ru - s.dx) * has_ub;
      s.dv = ArrayXd::Zero(n);
      for (int k = 0; k < n; ++k) {
        if (has_ub[k] > 0) s.dv[k] = (r_wv[k] - v[k] * s.dw[k]) / w[k];
      }
      return s;
    };
    auto step_sizes = [&](const Step& s) {
      const double ap = std::min(max_step(x, s.dx), max_step(w + (1 - has_ub), s.dw));
      const double ad = std::min(max_step(z, s.dz), max_step(v + (1 - has_ub), s.dv));
      return std::pair<double, double>{ap, ad};
    };

    const Step aff = newton(-x * z, -w * v * has_ub);
    auto [ap_aff, ad_aff] = step_sizes(aff);
    if (!is_lp) ap_aff = ad_aff = std::min(ap_aff, ad_aff);
    const double mu_aff =
        (((x + ap_aff * aff.dx) * (z + ad_aff * aff.dz)).sum() +
         ((w + ap_aff * aff.dw) * (v + ad_aff * aff.dv) * has_ub).sum()) /
        n_comp;
    const double centering = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);
    const ArrayXd r_xz = centering * mu - x * z - aff.dx * aff.dz;
    const ArrayXd r_wv =
        (centering * mu - w * v - aff.dw * aff.dv) * has_ub;
    const Step cor = newton(r_xz, r_wv);
    auto [ap, ad] = step_sizes(cor);
    ap = std::min(1.0, 0.995 * ap);
    ad = std::min(1.0, 0.995 * ad);
    if (!is_lp) ap = ad = std::min(ap, ad);
    if (!cor.dx.allFinite() || !cor.dy.allFinite()) {
      sol.status = QpStatus::kNumericalFailure;
      break;
    }
    x += ap * cor.dx;
    w += ap * cor.dw;
    y += ad * cor.dy;
    z += ad * cor.dz;
    v += ad * cor.dv;
    // Guard against exact zeros from rounding.
    x = x.max(1e-300);
    z = z.max(1e-300);
    for (int k = 0; k < n; ++k) {
      if (has_ub[k] > 0) {
        w[k] = std::max(w[k], 1e-300);
        v[k] = std::max(v[k], 1e-300);
      }
    }
  }
  if (n == 0) sol.status = QpStatus::kOptimal;
  sol.iterations = it;

  // Map back to the original variables and rows.
  sol.x.assign(total_vars, 0.0);
  sol.lower_dual.assign(total_vars, 0.0);
  sol.upper_dual.assign(total_vars, 0.0);
  sol.row_dual.assign(total_rows, 0.0);
  for (int i = 0; i < total_rows; ++i) {
    if (row[i] >= 0) sol.row_dual[i] = y[row[i]];
  }
  for (int j = 0; j < total_vars; ++j) {
    const int k = col[j];
    if (k >= 0) {
      sol.x[j] = lo[j] + x[k];
      sol.lower_dual[j] = z[k];
      sol.upper_dual[j] = has_ub[k] > 0 ? v[k] : 0.0;
    } else {
      sol.x[j] = lo[j];
    }
  }
  std::vector<double> reduced(total_vars, 0.0);
  for (int j = 0; j < total_vars; ++j) reduced[j] = cs[j] + qd[j] * sol.x[j];
  for (const auto& e : prob.entries()) {
    reduced[e.var] -= e.value * sol.row_dual[e.row];
  }
  for (int j = 0; j < total_vars; ++j) {
    if (col[j] < 0) {
      sol.lower_dual[j] = std::max(reduced[j], 0.0);
      sol.upper_dual[j] = std::max(-reduced[j], 0.0);
    }
  }

  sol.primal_objective = prob.objective(sol.x);
  double dual = 0.0;
  for (int i = 0; i < total_rows; ++i) dual += prob.rhs()[i] * sol.row_dual[i];
  for (int j = 0; j < total_vars; ++j) {
    dual -= 0.5 * qd[j] * sol.x[j] * sol.x[j];
    dual += lo[j] * sol.lower_dual[j];
    if (std::isfinite(up[j])) dual -= up[j] * sol.upper_dual[j];
  }
  sol.dual_objective = dual;
  return sol;
}

}  // namespace amod
