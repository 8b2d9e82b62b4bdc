#pragma once

#include <Eigen/Dense>

namespace semisteer {

/// Geometry of the kinematic bicycle. All lengths in meters.
struct VehicleParams {
  double l_f = 1.2;        ///< CoM to front axle
  double l_r = 1.6;        ///< CoM to rear axle
  double l_f_prime = 2.1;  ///< CoM to front bumper
  double w = 1.8;          ///< vehicle width

  /// Throws std::invalid_argument when a length is non-positive or the bumper
  /// sits behind the front axle.
  void validate() const;
};

/// Planar pose of the center of mass. theta is kept unwrapped.
struct VehiclePose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Eigen::Vector3d vec() const { return {x, y, theta}; }
  static VehiclePose from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
};

/// Inertial positions of the front-left and front-right corners.
struct FrontEdges {
  double x_fl = 0.0;
  double y_fl = 0.0;
  double x_fr = 0.0;
  double y_fr = 0.0;

  Eigen::Vector2d left() const { return {x_fl, y_fl}; }
  Eigen::Vector2d right() const { return {x_fr, y_fr}; }
};

/// Side-slip angle of the CoM velocity for steering angle delta (|delta| < pi/2).
double side_slip(double delta, const VehicleParams& params);

/// Continuous-time derivative [x_dot, y_dot, theta_dot].
Eigen::Vector3d bicycle_rates(const VehiclePose& pose, double delta, double v,
                              const VehicleParams& params);

/// One Forward Euler step of length dt. This is the prediction model.
VehiclePose euler_step(const VehiclePose& pose, double delta, double v, double dt,
                       const VehicleParams& params);

/// One classical Runge-Kutta step of length dt with steering held. This is the plant.
VehiclePose rk4_step(const VehiclePose& pose, double delta, double v, double dt,
                     const VehicleParams& params);

FrontEdges front_edges(const VehiclePose& pose, const VehicleParams& params);

/// d(corner)/d(pose) for the left (rows 0-1) and right (rows 2-3) corner.
Eigen::Matrix<double, 4, 3> front_edges_jacobian(const VehiclePose& pose,
                                                 const VehicleParams& params);

/// Affine model of the Euler step around an operating point:
///   next ~= A * pose + B * delta + c
struct LinearizedStep {
  Eigen::Matrix3d A;
  Eigen::Vector3d B;
  Eigen::Vector3d c;
};

LinearizedStep linearize_dynamics(const VehiclePose& pose, double delta, double v, double dt,
                                  const VehicleParams& params);

}  // namespace semisteer
