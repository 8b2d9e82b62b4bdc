#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace semisteer {

/// Dense convex QP
///
///   min  1/2 z'Hz + g'z
///   s.t. A_ineq z <= b_ineq
///        lb <= z <= ub          (entries may be +-infinity)
struct QuadProgram {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd A_ineq;
  Eigen::VectorXd b_ineq;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;

  /// Empty-constraint, unbounded program of dimension n.
  static QuadProgram unconstrained(Eigen::MatrixXd H, Eigen::VectorXd g);

  Eigen::Index num_vars() const { return g.size(); }
  Eigen::Index num_rows() const { return A_ineq.rows(); }

  /// Throws std::invalid_argument on shape mismatch, asymmetric H, lb > ub or NaN data.
  void validate() const;
};

enum class QpStatus { optimal, max_iter, infeasible };

std::string to_string(QpStatus status);

/// Constraint indices used in active_set and lagrange:
///   [0, m)        general rows A_ineq
///   [m, m+n)      upper bounds z_i <= ub_i
///   [m+n, m+2n)   lower bounds z_i >= lb_i
struct QpSolution {
  Eigen::VectorXd z;
  std::vector<int> active_set;
  Eigen::VectorXd lagrange;  ///< size m + 2n, zero for inactive constraints
  QpStatus status = QpStatus::max_iter;
  int iterations = 0;
  double kkt_residual = 0.0;
  double objective = 0.0;
  double regularization = 0.0;  ///< sigma added to the diagonal of H
  bool primal_feasible = false;
  /// Nonnegative row weights y (sum 1) with A'y ~ 0 and b'y < 0 when infeasible.
  Eigen::VectorXd certificate;
  /// True objective after each iteration of the feasible phase. Empty when no
  /// feasible point was reached.
  std::vector<double> objective_history;
};

/// Primal active-set solver. Holds scratch buffers; one instance per thread.
class QpSolver {
public:
  struct Settings {
    double min_eigenvalue = 1e-8;   ///< H is shifted so that lambda_min >= this
    double feasibility_tol = 1e-9;
    double multiplier_tol = 1e-10;
    int max_penalty_escalations = 3;
  };

  QpSolver() = default;
  explicit QpSolver(Settings settings) : settings_(settings) {}

  QpSolution solve(const QuadProgram& qp, const std::optional<Eigen::VectorXd>& warm_start = {});

  const Settings& settings() const { return settings_; }

private:
  struct Rows {
    Eigen::MatrixXd C;
    Eigen::VectorXd d;
    std::vector<int> external;  ///< row -> constraint index in QpSolution numbering
    Eigen::VectorXd norm;       ///< original row norm, multipliers are divided by it
  };

  enum class CoreResult { converged, max_iter };

  CoreResult run_active_set(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Rows& rows,
                            Eigen::VectorXd& y, std::vector<int>& working, int& iterations,
                            int max_iterations, std::vector<double>& history);

  bool solve_eqp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Rows& rows,
                 const std::vector<int>& working, Eigen::VectorXd& y, Eigen::VectorXd& lambda);

  Settings settings_;
  Eigen::MatrixXd kkt_;
  Eigen::VectorXd rhs_;
};

/// Convenience wrapper around a temporary QpSolver.
QpSolution solve_qp(const QuadProgram& qp, const std::optional<Eigen::VectorXd>& warm_start = {});

/// Plain-text dump used by the qp-dump debugging command.
void write_qp(std::ostream& os, const QuadProgram& qp);
QuadProgram read_qp(std::istream& is);

}  // namespace semisteer
