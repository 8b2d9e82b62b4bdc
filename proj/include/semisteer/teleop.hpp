#pragma once

#include "semisteer/vehicle.hpp"

#include <Eigen/Dense>

#include <vector>

namespace semisteer {

/// Polyline the simulated teleoperator tries to follow.
class DesiredPath {
public:
  /// Throws std::invalid_argument for fewer than two points or repeated points.
  explicit DesiredPath(std::vector<Eigen::Vector2d> waypoints);

  const std::vector<Eigen::Vector2d>& waypoints() const { return waypoints_; }
  std::size_t num_segments() const { return waypoints_.size() - 1; }
  double segment_heading(std::size_t k) const { return headings_[k]; }

private:
  std::vector<Eigen::Vector2d> waypoints_;
  std::vector<double> headings_;
};

struct TeleopGains {
  double gamma1 = 0.0;  ///< lateral-error gain
  double gamma2 = 0.75; ///< heading-error gain
  double gamma3 = 0.25; ///< blend toward the controller's last output, in [0, 1]

  void validate() const;
};

struct PathErrors {
  double lateral = 0.0;  ///< positive when the vehicle is left of the path [m]
  double heading = 0.0;  ///< wrapped into (-pi, pi] [rad]
  std::size_t segment = 0;
};

/// Wrap an angle into (-pi, pi].
double wrap_angle(double a);

/// Closest-point errors, searching segments from start_segment onward. The
/// segment index only advances once the projection passes a segment's end.
/// The first and last segments extend beyond their outer endpoints.
PathErrors path_errors(const VehiclePose& pose, const DesiredPath& path,
                       std::size_t start_segment = 0);

/// Feedback-linearized path tracker. Returns 0 below min_speed.
double fbl_steering(double e_lateral, double e_heading, double v, const TeleopGains& gains,
                    double min_speed = 0.1);

/// delta_fbl + gamma3 (delta_applied_prev - delta_fbl)
double teleop_reference(double delta_fbl, double delta_applied_prev, double gamma3);

/// Simulated teleoperator with segment hysteresis.
class SimulatedTeleoperator {
public:
  SimulatedTeleoperator(DesiredPath path, TeleopGains gains);

  struct Output {
    PathErrors errors;
    double delta_fbl = 0.0;
    double delta_ref = 0.0;
  };

  /// Computes the reference for this tick. On the very first call the previous
  /// applied steering is taken to be delta_fbl itself.
  Output step(const VehiclePose& pose, double v);

  /// Feed back the steering that was actually applied this tick.
  void observe_applied(double delta_applied) { last_applied_ = delta_applied; has_applied_ = true; }

  void reset();
  const DesiredPath& path() const { return path_; }
  const TeleopGains& gains() const { return gains_; }

private:
  DesiredPath path_;
  TeleopGains gains_;
  std::size_t segment_ = 0;
  double last_applied_ = 0.0;
  bool has_applied_ = false;
};

}  // namespace semisteer
