#include "semisteer/mpc.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace semisteer {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void MpcConfig::validate() const
{
  if (horizon < 2) throw std::invalid_argument("MPC horizon must be >= 2");
  if (!(t_d > 0.0) || !(t_s > 0.0)) throw std::invalid_argument("MPC step sizes must be positive");
  if (!(w_dref >= 0.0 && w_P >= 0.0 && w_drate >= 0.0)) {
    throw std::invalid_argument("MPC weights must be non-negative");
  }
  if (!(delta_min < delta_max)) throw std::invalid_argument("MPC needs delta_min < delta_max");
  if (!(rate_min < rate_max)) throw std::invalid_argument("MPC needs rate_min < rate_max");
  if (!(rate_min <= 0.0 && rate_max >= 0.0)) {
    throw std::invalid_argument("MPC rate limits must bracket zero");
  }
  if (!(delta_min <= 0.0 && delta_max >= 0.0)) {
    throw std::invalid_argument("MPC steering limits must bracket zero");
  }
  if (!(alpha_cap > 0.0)) throw std::invalid_argument("MPC alpha_cap must be positive");
  if (sqp_max_iter < 1) throw std::invalid_argument("MPC needs at least one SQP iteration");
  if (!(sqp_tol > 0.0)) throw std::invalid_argument("MPC sqp_tol must be positive");
  if (!(slack_lin >= 0.0 && slack_quad > 0.0)) {
    throw std::invalid_argument("MPC slack penalties must be positive");
  }
  if (max_step_halvings < 0) throw std::invalid_argument("MPC max_step_halvings must be >= 0");
}

double cost_reference(double delta_0, double delta_ref, double w_dref)
{
  const double e = delta_0 - delta_ref;
  return w_dref * e * e;
}

double cost_potential(const std::vector<FrontEdges>& edges, const FieldSpec& field, double w_P)
{
  double sum = 0.0;
  for (const auto& e : edges) {
    sum += potential_value(e.left(), field) + potential_value(e.right(), field);
  }
  return w_P * sum;
}

double cost_smoothness(const std::vector<double>& delta_seq, double w_drate)
{
  double sum = 0.0;
  for (std::size_t i = 1; i < delta_seq.size(); ++i) {
    const double d = delta_seq[i] - delta_seq[i - 1];
    sum += d * d;
  }
  return w_drate * sum;
}

Rollout rollout(const VehiclePose& xi0, const std::vector<double>& delta_seq, double v, double t_d,
                const VehicleParams& vehicle)
{
  Rollout out;
  out.states.reserve(delta_seq.size());
  out.edges.reserve(delta_seq.size());
  VehiclePose pose = xi0;
  for (double delta : delta_seq) {
    pose = euler_step(pose, delta, v, t_d, vehicle);
    out.states.push_back(pose);
    out.edges.push_back(front_edges(pose, vehicle));
  }
  return out;
}

std::vector<double> shift_sequence(const std::vector<double>& seq)
{
  if (seq.empty()) {
    return {};
  }
  std::vector<double> out(seq.begin() + 1, seq.end());
  out.push_back(seq.back());
  return out;
}

std::vector<double> project_admissible(const std::vector<double>& seq, double delta_prev,
                                       const MpcConfig& config)
{
  std::vector<double> out(seq.size());
  double prev = delta_prev;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const double dt = i == 0 ? config.t_s : config.t_d;
    const double lo = std::max(config.delta_min, prev + config.rate_min * dt);
    const double hi = std::min(config.delta_max, prev + config.rate_max * dt);
    out[i] = std::clamp(seq[i], lo, hi);
    prev = out[i];
  }
  return out;
}

namespace {

Eigen::Matrix2d psd_projection(const Eigen::Matrix2d& m)
{
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(m);
  const Eigen::Vector2d clamped = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
}

void check_problem(const SteeringProblem& p, const MpcConfig& config)
{
  const bool finite = std::isfinite(p.xi0.x) && std::isfinite(p.xi0.y) &&
                      std::isfinite(p.xi0.theta) && std::isfinite(p.delta_ref) &&
                      std::isfinite(p.delta_prev) && std::isfinite(p.v);
  if (!finite) {
    throw std::invalid_argument("steering problem has non-finite inputs");
  }
  if (std::abs(p.delta_ref) > std::numbers::pi / 2) {
    throw std::invalid_argument("steering reference magnitude exceeds pi/2");
  }
  if (p.v < 0.0) {
    throw std::invalid_argument("speed must be non-negative");
  }
  if (p.delta_prev < config.delta_min - 1e-12 || p.delta_prev > config.delta_max + 1e-12) {
    throw std::invalid_argument("previous steering lies outside the steering limits");
  }
}

}  // namespace

SteeringController::SteeringController(MpcConfig config) : config_(config)
{
  config_.validate();
}

double SteeringController::penalized_cost(const SteeringProblem& problem,
                                          const std::vector<double>& delta_seq,
                                          const Rollout& predicted, CostTerms* terms,
                                          double* max_potential) const
{
  CostTerms t;
  t.reference = cost_reference(delta_seq.front(), problem.delta_ref, config_.w_dref);
  t.smoothness = cost_smoothness(delta_seq, config_.w_drate);
  double sum = 0.0;
  double worst = 0.0;
  for (const auto& e : predicted.edges) {
    const double pl = potential_value(e.left(), problem.field);
    const double pr = potential_value(e.right(), problem.field);
    sum += pl + pr;
    worst = std::max({worst, pl, pr});
  }
  t.potential = config_.w_P * sum;
  const double violation = std::max(0.0, worst - config_.alpha_cap);
  if (terms) *terms = t;
  if (max_potential) *max_potential = worst;
  return t.total() + config_.slack_lin * violation + config_.slack_quad * violation * violation;
}

QuadProgram SteeringController::build_qp(const SteeringProblem& problem,
                                         const std::vector<double>& operating) const
{
  const int N = config_.horizon;
  const Index n = N + 1;
  const Index slack = N;

  MatrixXd H = MatrixXd::Zero(n, n);
  VectorXd g = VectorXd::Zero(n);

  H(0, 0) += 2.0 * config_.w_dref;
  g(0) -= 2.0 * config_.w_dref * problem.delta_ref;
  for (int i = 1; i < N; ++i) {
    H(i, i) += 2.0 * config_.w_drate;
    H(i - 1, i - 1) += 2.0 * config_.w_drate;
    H(i, i - 1) -= 2.0 * config_.w_drate;
    H(i - 1, i) -= 2.0 * config_.w_drate;
  }
  H(slack, slack) = 2.0 * config_.slack_quad;
  g(slack) = config_.slack_lin;

  // Rows: 2 first-step rate rows, 2(N-1) intra-horizon rate rows, 2N potential rows.
  const Index rate_rows = 2 * N;
  const Index pot_rows = 2 * N;
  MatrixXd A = MatrixXd::Zero(rate_rows + pot_rows, n);
  VectorXd b = VectorXd::Zero(rate_rows + pot_rows);

  A(0, 0) = 1.0;
  b(0) = problem.delta_prev + config_.rate_max * config_.t_s;
  A(1, 0) = -1.0;
  b(1) = -(problem.delta_prev + config_.rate_min * config_.t_s);
  for (int i = 1; i < N; ++i) {
    const Index r = 2 * i;
    A(r, i) = 1.0;
    A(r, i - 1) = -1.0;
    b(r) = config_.rate_max * config_.t_d;
    A(r + 1, i) = -1.0;
    A(r + 1, i - 1) = 1.0;
    b(r + 1) = -config_.rate_min * config_.t_d;
  }

  // Linearize the Euler rollout and chain the state sensitivities.
  Eigen::Map<const VectorXd> op(operating.data(), N);
  MatrixXd S = MatrixXd::Zero(3, N);  // d xi_i / d delta
  MatrixXd Q = MatrixXd::Zero(N, N);
  VectorXd grad_total = VectorXd::Zero(N);
  VehiclePose pose = problem.xi0;
  for (int i = 0; i < N; ++i) {
    const LinearizedStep lin =
        linearize_dynamics(pose, operating[i], problem.v, config_.t_d, problem.vehicle);
    S = lin.A * S;
    S.col(i) += lin.B;
    pose = euler_step(pose, operating[i], problem.v, config_.t_d, problem.vehicle);

    const Eigen::Matrix<double, 4, 3> E = front_edges_jacobian(pose, problem.vehicle);
    const MatrixXd J = E * S;  // 4 x N
    const FrontEdges edges = front_edges(pose, problem.vehicle);
    const Eigen::Vector2d corners[2] = {edges.left(), edges.right()};
    for (int c = 0; c < 2; ++c) {
      const PotentialEval pe = potential_eval(corners[c], problem.field);
      const MatrixXd Jc = J.middleRows(2 * c, 2);
      const VectorXd grad = Jc.transpose() * pe.grad;
      Q += Jc.transpose() * psd_projection(pe.hess) * Jc;
      grad_total += grad;

      const Index r = rate_rows + 2 * i + c;
      A.block(r, 0, 1, N) = grad.transpose();
      A(r, slack) = -1.0;
      b(r) = config_.alpha_cap - pe.value + grad.dot(op);
    }
  }

  H.topLeftCorner(N, N) += config_.w_P * Q;
  g.head(N) += config_.w_P * (grad_total - Q * op);
  // Q is a sum of symmetric terms; clean round-off so validation sees exact symmetry
  H = 0.5 * (H + H.transpose()).eval();

  QuadProgram qp;
  qp.H = std::move(H);
  qp.g = std::move(g);
  qp.A_ineq = std::move(A);
  qp.b_ineq = std::move(b);
  qp.lb = VectorXd::Constant(n, config_.delta_min);
  qp.ub = VectorXd::Constant(n, config_.delta_max);
  qp.lb(slack) = 0.0;
  qp.ub(slack) = std::numeric_limits<double>::infinity();
  return qp;
}

SteeringSolution SteeringController::solve(const SteeringProblem& problem,
                                           const SteeringSolution* warm)
{
  const auto start = std::chrono::steady_clock::now();
  check_problem(problem, config_);
  const int N = config_.horizon;

  SteeringSolution sol;
  if (warm && static_cast<int>(warm->delta_seq.size()) == N) {
    sol.initial_guess = shift_sequence(warm->delta_seq);
  } else {
    sol.initial_guess.assign(static_cast<std::size_t>(N), 0.0);
  }

  std::vector<double> current = project_admissible(sol.initial_guess, problem.delta_prev, config_);
  Rollout current_roll = rollout(problem.xi0, current, problem.v, config_.t_d, problem.vehicle);
  double current_cost = penalized_cost(problem, current, current_roll);
  double last_slack = 0.0;

  for (int it = 0; it < config_.sqp_max_iter; ++it) {
    sol.operating_points.push_back(current);
    ++sol.sqp_iters;

    const QuadProgram qp = build_qp(problem, current);
    if (qp_hook_) {
      qp_hook_(qp, it);
    }

    // the operating point plus the slack it needs is feasible for the QP
    VectorXd warm_z(N + 1);
    for (int i = 0; i < N; ++i) warm_z(i) = current[static_cast<std::size_t>(i)];
    warm_z(N) = std::max(0.0, (qp.A_ineq.bottomRows(2 * N).leftCols(N) * warm_z.head(N) -
                               qp.b_ineq.tail(2 * N))
                                  .maxCoeff());
    const QpSolution qs = qp_solver_.solve(qp, warm_z);

    QpStats stats;
    stats.status = qs.status;
    stats.iterations = qs.iterations;
    stats.kkt_residual = qs.kkt_residual;
    stats.active_constraints = static_cast<int>(qs.active_set.size());
    stats.slack = qs.z(N);

    const bool usable = qs.status == QpStatus::optimal ||
                        (qs.status == QpStatus::max_iter && qs.primal_feasible);
    if (!usable) {
      sol.qp_stats.push_back(stats);
      if (it == 0) {
        sol.fault = true;
      }
      break;
    }

    // Safeguarded step toward the QP minimizer.
    std::vector<double> best;
    Rollout best_roll;
    double best_cost = std::numeric_limits<double>::infinity();
    double best_scale = 0.0;
    double scale = 1.0;
    for (int h = 0; h <= config_.max_step_halvings; ++h, scale *= 0.5) {
      std::vector<double> trial(static_cast<std::size_t>(N));
      for (int i = 0; i < N; ++i) {
        const auto k = static_cast<std::size_t>(i);
        trial[k] = current[k] + scale * (qs.z(i) - current[k]);
      }
      Rollout trial_roll = rollout(problem.xi0, trial, problem.v, config_.t_d, problem.vehicle);
      const double cost = penalized_cost(problem, trial, trial_roll);
      if (cost < best_cost) {
        best_cost = cost;
        best = std::move(trial);
        best_roll = std::move(trial_roll);
        best_scale = scale;
      }
      if (best_cost <= current_cost) {
        break;
      }
    }

    if (best_cost > current_cost * (1.0 + 1e-9) + 1e-12) {
      stats.step_scale = 0.0;
      sol.qp_stats.push_back(stats);
      break;
    }
    stats.step_scale = best_scale;
    sol.qp_stats.push_back(stats);
    last_slack = best_scale == 1.0 ? stats.slack : last_slack;

    double max_change = 0.0;
    for (int i = 0; i < N; ++i) {
      const auto k = static_cast<std::size_t>(i);
      max_change = std::max(max_change, std::abs(best[k] - current[k]));
    }
    current = std::move(best);
    current_roll = std::move(best_roll);
    current_cost = best_cost;
    if (max_change < config_.sqp_tol) {
      break;
    }
  }

  // Accepted iterates are feasible up to round-off; the clamp makes the limits exact.
  current = project_admissible(sol.fault ? sol.initial_guess : current, problem.delta_prev,
                               config_);
  current_roll = rollout(problem.xi0, current, problem.v, config_.t_d, problem.vehicle);

  sol.penalized_cost = penalized_cost(problem, current, current_roll, &sol.cost_terms,
                                      &sol.max_predicted_potential);
  sol.slack_used = last_slack > 1e-6 ||
                   sol.max_predicted_potential > config_.alpha_cap * (1.0 + 1e-6);
  sol.delta_seq = std::move(current);
  sol.predicted_states = std::move(current_roll.states);
  sol.predicted_edges = std::move(current_roll.edges);
  sol.solve_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return sol;
}

}  // namespace semisteer
