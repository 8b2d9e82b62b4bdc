#include "semisteer/qp.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace semisteer {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double objective_of(const MatrixXd& H, const VectorXd& g, const VectorXd& z)
{
  return 0.5 * z.dot(H * z) + g.dot(z);
}

}  // namespace

QuadProgram QuadProgram::unconstrained(MatrixXd H, VectorXd g)
{
  const Index n = g.size();
  QuadProgram qp;
  qp.H = std::move(H);
  qp.g = std::move(g);
  qp.A_ineq = MatrixXd::Zero(0, n);
  qp.b_ineq = VectorXd::Zero(0);
  qp.lb = VectorXd::Constant(n, -kInf);
  qp.ub = VectorXd::Constant(n, kInf);
  return qp;
}

void QuadProgram::validate() const
{
  const Index n = g.size();
  if (H.rows() != n || H.cols() != n) {
    throw std::invalid_argument("QP: H must be n x n");
  }
  if (A_ineq.cols() != n || A_ineq.rows() != b_ineq.size()) {
    throw std::invalid_argument("QP: A_ineq must be m x n with b_ineq of size m");
  }
  if (lb.size() != n || ub.size() != n) {
    throw std::invalid_argument("QP: bounds must have size n");
  }
  if (!H.allFinite() || !g.allFinite() || !A_ineq.allFinite() || !b_ineq.allFinite()) {
    throw std::invalid_argument("QP: non-finite problem data");
  }
  if (lb.hasNaN() || ub.hasNaN()) {
    throw std::invalid_argument("QP: NaN in bounds");
  }
  if (n > 0 && (H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, H.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("QP: H must be symmetric");
  }
  for (Index i = 0; i < n; ++i) {
    if (lb(i) > ub(i)) {
      throw std::invalid_argument("QP: lb > ub");
    }
  }
}

std::string to_string(QpStatus status)
{
  switch (status) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::max_iter: return "max_iter";
    case QpStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

bool QpSolver::solve_eqp(const MatrixXd& H, const VectorXd& g, const Rows& rows,
                         const std::vector<int>& working, VectorXd& y, VectorXd& lambda)
{
  const Index n = g.size();
  const Index k = static_cast<Index>(working.size());
  kkt_.setZero(n + k, n + k);
  rhs_.resize(n + k);
  kkt_.topLeftCorner(n, n) = H;
  rhs_.head(n) = -g;
  for (Index j = 0; j < k; ++j) {
    const auto r = working[static_cast<std::size_t>(j)];
    kkt_.block(n + j, 0, 1, n) = rows.C.row(r);
    kkt_.block(0, n + j, n, 1) = rows.C.row(r).transpose();
    rhs_(n + j) = rows.d(r);
  }
  Eigen::FullPivLU<MatrixXd> lu(kkt_);
  if (!lu.isInvertible()) {
    return false;
  }
  VectorXd sol = lu.solve(rhs_);
  // one step of iterative refinement keeps the stationarity residual near round-off
  sol += lu.solve(rhs_ - kkt_ * sol);
  y = sol.head(n);
  lambda = sol.tail(k);
  return true;
}

QpSolver::CoreResult QpSolver::run_active_set(const MatrixXd& H, const VectorXd& g,
                                              const Rows& rows, VectorXd& y,
                                              std::vector<int>& working, int& iterations,
                                              int max_iterations, std::vector<double>& history)
{
  VectorXd target;
  VectorXd lambda;
  std::vector<char> in_working(static_cast<std::size_t>(rows.C.rows()), 0);
  for (int r : working) {
    in_working[static_cast<std::size_t>(r)] = 1;
  }

  while (iterations < max_iterations) {
    ++iterations;
    if (!solve_eqp(H, g, rows, working, target, lambda)) {
      // dependent working set; the primal method never builds one, so bail out
      return CoreResult::max_iter;
    }
    const VectorXd p = target - y;
    const double scale = 1.0 + y.lpNorm<Eigen::Infinity>();

    if (p.lpNorm<Eigen::Infinity>() <= 1e-12 * scale) {
      y = target;
      history.push_back(objective_of(H, g, y));
      int leaving = -1;
      double most_negative = -settings_.multiplier_tol;
      for (std::size_t j = 0; j < working.size(); ++j) {
        if (lambda(static_cast<Index>(j)) < most_negative) {
          most_negative = lambda(static_cast<Index>(j));
          leaving = static_cast<int>(j);
        }
      }
      if (leaving < 0) {
        return CoreResult::converged;
      }
      in_working[static_cast<std::size_t>(working[static_cast<std::size_t>(leaving)])] = 0;
      working.erase(working.begin() + leaving);
      continue;
    }

    // ratio test, ties go to the lowest row index
    double step = 1.0;
    int blocking = -1;
    const double p_norm = p.norm();
    for (Index r = 0; r < rows.C.rows(); ++r) {
      if (in_working[static_cast<std::size_t>(r)]) {
        continue;
      }
      const double cp = rows.C.row(r).dot(p);
      if (cp <= 1e-13 * p_norm * rows.C.row(r).norm()) {
        continue;
      }
      const double room = std::max(0.0, rows.d(r) - rows.C.row(r).dot(y));
      const double t = room / cp;
      if (t < step) {
        step = t;
        blocking = static_cast<int>(r);
      }
    }

    if (blocking < 0) {
      y = target;
    } else {
      y += step * p;
      working.insert(std::upper_bound(working.begin(), working.end(), blocking), blocking);
      in_working[static_cast<std::size_t>(blocking)] = 1;
    }
    history.push_back(objective_of(H, g, y));
  }
  return CoreResult::max_iter;
}

QpSolution QpSolver::solve(const QuadProgram& qp, const std::optional<VectorXd>& warm_start)
{
  qp.validate();
  const Index n = qp.num_vars();
  const Index m = qp.num_rows();

  QpSolution sol;
  sol.lagrange = VectorXd::Zero(m + 2 * n);

  MatrixXd H = 0.5 * (qp.H + qp.H.transpose());
  if (n > 0) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(H, Eigen::EigenvaluesOnly);
    const double lambda_min = eig.eigenvalues().minCoeff();
    if (lambda_min < settings_.min_eigenvalue) {
      sol.regularization = settings_.min_eigenvalue - lambda_min;
      H.diagonal().array() += sol.regularization;
    }
  }

  VectorXd z0 = VectorXd::Zero(n);
  if (warm_start) {
    if (warm_start->size() != n || !warm_start->allFinite()) {
      throw std::invalid_argument("QP: warm start has wrong size or non-finite entries");
    }
    z0 = *warm_start;
  }
  z0 = z0.cwiseMax(qp.lb).cwiseMin(qp.ub);

  // Unified row form C z <= d. General rows first, then finite upper and lower bounds.
  Rows base;
  {
    Index count = m;
    for (Index i = 0; i < n; ++i) {
      count += std::isfinite(qp.ub(i)) ? 1 : 0;
      count += std::isfinite(qp.lb(i)) ? 1 : 0;
    }
    base.C = MatrixXd::Zero(count, n);
    base.d = VectorXd::Zero(count);
    // General rows are normalized so one badly scaled row cannot swamp the
    // KKT systems; bound rows already have unit norm.
    base.norm = VectorXd::Ones(count);
    for (Index i = 0; i < m; ++i) {
      const double norm = qp.A_ineq.row(i).norm();
      base.norm(i) = norm > 0.0 ? norm : 1.0;
      base.C.row(i) = qp.A_ineq.row(i) / base.norm(i);
      base.d(i) = qp.b_ineq(i) / base.norm(i);
      base.external.push_back(static_cast<int>(i));
    }
    Index r = m;
    for (Index i = 0; i < n; ++i) {
      if (std::isfinite(qp.ub(i))) {
        base.C(r, i) = 1.0;
        base.d(r) = qp.ub(i);
        base.external.push_back(static_cast<int>(m + i));
        ++r;
      }
    }
    for (Index i = 0; i < n; ++i) {
      if (std::isfinite(qp.lb(i))) {
        base.C(r, i) = -1.0;
        base.d(r) = -qp.lb(i);
        base.external.push_back(static_cast<int>(m + n + i));
        ++r;
      }
    }
  }
  const Index rows_total = base.C.rows();
  const int max_iterations = static_cast<int>(std::max<Index>(1, 10 * (n + rows_total)));

  double violation = 0.0;
  if (m > 0) {
    violation = std::max(0.0, (base.C.topRows(m) * z0 - base.d.head(m)).maxCoeff());
  }

  std::vector<int> working;
  VectorXd z = z0;
  bool reached_feasible = violation <= settings_.feasibility_tol;

  if (!reached_feasible) {
    // Phase 1: one shared elastic variable t >= 0 on the general rows with an
    // exact linear penalty. The objective is the distance to the start point,
    // not the real one, so the data stay O(1) however badly H is scaled.
    // Once t reaches zero the iterate is feasible.
    const Index na = n + 1;
    double penalty = 1e6;

    MatrixXd Ha = MatrixXd::Identity(na, na);
    VectorXd ga(na);
    ga.head(n) = -z0;
    ga(n) = penalty;

    Rows aug;
    aug.C = MatrixXd::Zero(rows_total + 1, na);
    aug.C.topLeftCorner(rows_total, n) = base.C;
    aug.C.block(0, n, m, 1).setConstant(-1.0);
    aug.C(rows_total, n) = -1.0;
    aug.d = VectorXd::Zero(rows_total + 1);
    aug.d.head(rows_total) = base.d;
    aug.external = base.external;
    aug.external.push_back(-1);
    aug.norm = VectorXd::Ones(rows_total + 1);
    aug.norm.head(rows_total) = base.norm;

    VectorXd y(na);
    y.head(n) = z0;
    y(n) = violation;

    std::vector<double> elastic_history;
    for (int escalation = 0; escalation <= settings_.max_penalty_escalations; ++escalation) {
      const CoreResult res = run_active_set(Ha, ga, aug, y, working, sol.iterations,
                                            max_iterations, elastic_history);
      if (res == CoreResult::max_iter) {
        break;
      }
      if (y(n) <= settings_.feasibility_tol) {
        reached_feasible = true;
        break;
      }
      penalty *= 1e3;
      ga(n) = penalty;
    }

    z = y.head(n);
    if (!reached_feasible) {
      const bool converged = sol.iterations < max_iterations;
      sol.z = z;
      sol.status = converged ? QpStatus::infeasible : QpStatus::max_iter;
      sol.objective = objective_of(qp.H, qp.g, z);
      sol.primal_feasible = false;
      sol.certificate = VectorXd::Zero(m + 2 * n);
      if (converged) {
        VectorXd target;
        VectorXd lambda;
        if (solve_eqp(Ha, ga, aug, working, target, lambda)) {
          double total = 0.0;
          for (std::size_t j = 0; j < working.size(); ++j) {
            const int ext = aug.external[static_cast<std::size_t>(working[j])];
            const double value = lambda(static_cast<Index>(j)) / aug.norm(working[j]);
            if (ext >= 0 && value > 0.0) {
              sol.certificate(ext) = value;
              total += value;
            }
          }
          if (total > 0.0) {
            sol.certificate /= total;
          }
        }
      }
      return sol;
    }
    // drop the elastic row; base row indices coincide with the augmented ones
    std::erase(working, static_cast<int>(rows_total));
  }

  const CoreResult res = run_active_set(H, qp.g, base, z, working, sol.iterations,
                                        max_iterations, sol.objective_history);

  sol.z = z;
  sol.objective = objective_of(qp.H, qp.g, z);
  const double max_violation =
      rows_total > 0 ? (base.C * z - base.d).maxCoeff() : -kInf;
  sol.primal_feasible = max_violation <= settings_.feasibility_tol;

  VectorXd target;
  VectorXd lambda;
  VectorXd stationarity = H * z + qp.g;
  if (solve_eqp(H, qp.g, base, working, target, lambda)) {
    for (std::size_t j = 0; j < working.size(); ++j) {
      const int r = working[j];
      const int ext = base.external[static_cast<std::size_t>(r)];
      sol.lagrange(ext) = lambda(static_cast<Index>(j)) / base.norm(r);
      sol.active_set.push_back(ext);
      stationarity += lambda(static_cast<Index>(j)) * base.C.row(r).transpose();
    }
  }
  std::sort(sol.active_set.begin(), sol.active_set.end());
  sol.kkt_residual = n > 0 ? stationarity.lpNorm<Eigen::Infinity>() : 0.0;
  sol.status = res == CoreResult::converged ? QpStatus::optimal : QpStatus::max_iter;
  return sol;
}

QpSolution solve_qp(const QuadProgram& qp, const std::optional<VectorXd>& warm_start)
{
  QpSolver solver;
  return solver.solve(qp, warm_start);
}

namespace {

void write_vector(std::ostream& os, const VectorXd& v)
{
  for (Index i = 0; i < v.size(); ++i) {
    os << (i ? " " : "") << v(i);
  }
  os << '\n';
}

double next_number(std::istream& is)
{
  std::string token;
  if (!(is >> token)) {
    throw std::runtime_error("QP dump: unexpected end of input");
  }
  char* end = nullptr;
  const double value = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') {
    throw std::runtime_error("QP dump: bad number '" + token + "'");
  }
  return value;
}

void expect(std::istream& is, const std::string& keyword)
{
  std::string token;
  if (!(is >> token) || token != keyword) {
    throw std::runtime_error("QP dump: expected '" + keyword + "'");
  }
}

}  // namespace

void write_qp(std::ostream& os, const QuadProgram& qp)
{
  const Index n = qp.num_vars();
  const Index m = qp.num_rows();
  const auto old_precision = os.precision(17);
  os << "qp " << n << ' ' << m << '\n';
  os << "H\n";
  for (Index i = 0; i < n; ++i) {
    write_vector(os, qp.H.row(i).transpose());
  }
  os << "g\n";
  write_vector(os, qp.g);
  os << "A\n";
  for (Index i = 0; i < m; ++i) {
    write_vector(os, qp.A_ineq.row(i).transpose());
  }
  os << "b\n";
  write_vector(os, qp.b_ineq);
  os << "lb\n";
  write_vector(os, qp.lb);
  os << "ub\n";
  write_vector(os, qp.ub);
  os.precision(old_precision);
}

QuadProgram read_qp(std::istream& is)
{
  expect(is, "qp");
  Index n = 0;
  Index m = 0;
  if (!(is >> n >> m) || n < 0 || m < 0) {
    throw std::runtime_error("QP dump: bad header");
  }
  QuadProgram qp;
  qp.H.resize(n, n);
  qp.g.resize(n);
  qp.A_ineq.resize(m, n);
  qp.b_ineq.resize(m);
  qp.lb.resize(n);
  qp.ub.resize(n);
  expect(is, "H");
  for (Index i = 0; i < n * n; ++i) qp.H(i / n, i % n) = next_number(is);
  expect(is, "g");
  for (Index i = 0; i < n; ++i) qp.g(i) = next_number(is);
  expect(is, "A");
  for (Index i = 0; i < m * n; ++i) qp.A_ineq(i / n, i % n) = next_number(is);
  expect(is, "b");
  for (Index i = 0; i < m; ++i) qp.b_ineq(i) = next_number(is);
  expect(is, "lb");
  for (Index i = 0; i < n; ++i) qp.lb(i) = next_number(is);
  expect(is, "ub");
  for (Index i = 0; i < n; ++i) qp.ub(i) = next_number(is);
  return qp;
}

}  // namespace semisteer
