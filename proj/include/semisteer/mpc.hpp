#pragma once

#include "semisteer/field.hpp"
#include "semisteer/qp.hpp"
#include "semisteer/vehicle.hpp"

#include <functional>
#include <vector>

namespace semisteer {

/// Controller tuning. Angles in radians, rates in rad/s, times in seconds.
struct MpcConfig {
  int horizon = 12;
  double t_d = 0.2;   ///< prediction step
  double t_s = 0.05;  ///< sampling period
  double w_dref = 500.0;
  double w_P = 0.15;
  double w_drate = 200.0;
  double delta_min = -0.6108652381980153;  // -35 deg
  double delta_max = 0.6108652381980153;
  double rate_min = -0.5235987755982988;  // -30 deg/s
  double rate_max = 0.5235987755982988;
  double alpha_cap = 1.0;
  int sqp_max_iter = 3;
  double sqp_tol = 1e-4;
  double slack_lin = 1e4;
  double slack_quad = 1e4;
  int max_step_halvings = 4;

  void validate() const;
};

struct SteeringProblem {
  VehiclePose xi0;
  double delta_ref = 0.0;   ///< teleoperator reference
  double delta_prev = 0.0;  ///< steering applied one sampling period ago
  double v = 0.0;
  FieldSpec field;
  VehicleParams vehicle;
};

struct CostTerms {
  double reference = 0.0;
  double potential = 0.0;
  double smoothness = 0.0;

  double total() const { return reference + potential + smoothness; }
};

struct QpStats {
  QpStatus status = QpStatus::max_iter;
  int iterations = 0;
  double kkt_residual = 0.0;
  int active_constraints = 0;
  double slack = 0.0;
  double step_scale = 0.0;  ///< fraction of the QP step accepted (0 = rejected)
};

struct SteeringSolution {
  std::vector<double> delta_seq;               ///< delta_0 .. delta_{N-1}
  std::vector<VehiclePose> predicted_states;   ///< xi_1 .. xi_N
  std::vector<FrontEdges> predicted_edges;     ///< eta_1 .. eta_N
  CostTerms cost_terms;
  double penalized_cost = 0.0;
  int sqp_iters = 0;
  std::vector<QpStats> qp_stats;
  double max_predicted_potential = 0.0;
  bool slack_used = false;
  bool fault = false;
  double solve_time = 0.0;

  /// Starting guess before feasibility projection: previous sequence shifted by
  /// one with the last entry duplicated, or zeros on a cold start.
  std::vector<double> initial_guess;
  /// Linearization point of every SQP iteration.
  std::vector<std::vector<double>> operating_points;

  double applied() const { return delta_seq.empty() ? 0.0 : delta_seq.front(); }
};

// Individual cost terms.
double cost_reference(double delta_0, double delta_ref, double w_dref);
double cost_potential(const std::vector<FrontEdges>& edges, const FieldSpec& field, double w_P);
double cost_smoothness(const std::vector<double>& delta_seq, double w_drate);

struct Rollout {
  std::vector<VehiclePose> states;  ///< xi_1 .. xi_N
  std::vector<FrontEdges> edges;    ///< eta_1 .. eta_N
};

Rollout rollout(const VehiclePose& xi0, const std::vector<double>& delta_seq, double v, double t_d,
                const VehicleParams& vehicle);

/// Previous sequence with its head dropped and its tail duplicated.
std::vector<double> shift_sequence(const std::vector<double>& seq);

/// Forward clamp of a steering sequence into the magnitude and rate limits.
std::vector<double> project_admissible(const std::vector<double>& seq, double delta_prev,
                                       const MpcConfig& config);

/// Steering controller: SQP over the horizon with a dense active-set QP per iteration.
/// Single-threaded; keep one instance per session.
class SteeringController {
public:
  using QpHook = std::function<void(const QuadProgram&, int sqp_iteration)>;

  explicit SteeringController(MpcConfig config);

  /// Throws std::invalid_argument on non-finite or inadmissible inputs.
  SteeringSolution solve(const SteeringProblem& problem, const SteeringSolution* warm = nullptr);

  const MpcConfig& config() const { return config_; }
  void set_qp_hook(QpHook hook) { qp_hook_ = std::move(hook); }

  /// Cost plus slack penalty on the worst potential-constraint violation.
  double penalized_cost(const SteeringProblem& problem, const std::vector<double>& delta_seq,
                        const Rollout& predicted, CostTerms* terms = nullptr,
                        double* max_potential = nullptr) const;

  /// The QP approximation about an operating sequence. Variables are
  /// [delta_0 .. delta_{N-1}, slack].
  QuadProgram build_qp(const SteeringProblem& problem, const std::vector<double>& operating) const;

private:
  MpcConfig config_;
  QpSolver qp_solver_;
  QpHook qp_hook_;
};

}  // namespace semisteer
