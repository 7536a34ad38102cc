#pragma once

#include <limits>
#include <string>
#include <vector>

namespace amod {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Convex separable QP in equality form:
//   minimize   0.5 * sum_k quad[k] * x[k]^2 + cost . x
//   subject to A x = rhs,  lower <= x <= upper
// Every lower bound is finite; upper bounds may be kInf.
class QpProblem {
 public:
  int add_var(double lower, double upper, double cost, double quad = 0.0);
  int add_row(double rhs);
  void add_coef(int row, int var, double value);

  int num_vars() const { return static_cast<int>(cost_.size()); }
  int num_rows() const { return static_cast<int>(rhs_.size()); }

  void set_cost(int var, double cost) { cost_[var] = cost; }
  void set_quad(int var, double quad) { quad_[var] = quad; }
  void set_bounds(int var, double lower, double upper);
  void set_rhs(int row, double rhs) { rhs_[row] = rhs; }

  const std::vector<double>& cost() const { return cost_; }
  const std::vector<double>& quad() const { return quad_; }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  const std::vector<double>& rhs() const { return rhs_; }

  struct Entry {
    int row;
    int var;
    double value;
  };
  const std::vector<Entry>& entries() const { return entries_; }

  double objective(const std::vector<double>& x) const;

 private:
  std::vector<double> cost_, quad_, lower_, upper_, rhs_;
  std::vector<Entry> entries_;
};

struct QpOptions {
  double tolerance = 1e-9;
  int max_iterations = 200;
};

enum class QpStatus { kOptimal, kMaxIterations, kNumericalFailure, kInfeasible };

std::string to_string(QpStatus status);

struct QpSolution {
  QpStatus status = QpStatus::kNumericalFailure;
  std::vector<double> x;
  std::vector<double> row_dual;    // y in  Q x + c = A^T y + z_lower - z_upper
  std::vector<double> lower_dual;  // >= 0
  std::vector<double> upper_dual;  // >= 0
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;  // relative, max-norm
  double dual_residual = 0.0;
  int iterations = 0;
};

// Primal-dual interior point (Mehrotra predictor-corrector) on the normal
// equations, factorized with a sparse LDL^T.
QpSolution solve_qp(const QpProblem& problem, const QpOptions& options = {});

}  // namespace amod
