#include "semisteer/vehicle.hpp"

#include <cmath>
#include <stdexcept>

namespace semisteer {

void VehicleParams::validate() const
{
  if (!(l_f > 0.0 && l_r > 0.0 && l_f_prime > 0.0 && w > 0.0)) {
    throw std::invalid_argument("vehicle lengths must be strictly positive");
  }
  if (l_f_prime < l_f) {
    throw std::invalid_argument("front bumper distance must not be shorter than l_f");
  }
}

double side_slip(double delta, const VehicleParams& params)
{
  return std::atan(params.l_r / (params.l_f + params.l_r) * std::tan(delta));
}

Eigen::Vector3d bicycle_rates(const VehiclePose& pose, double delta, double v,
                              const VehicleParams& params)
{
  const double beta = side_slip(delta, params);
  return {v * std::cos(pose.theta + beta), v * std::sin(pose.theta + beta),
          v / params.l_r * std::sin(beta)};
}

VehiclePose euler_step(const VehiclePose& pose, double delta, double v, double dt,
                       const VehicleParams& params)
{
  return VehiclePose::from(pose.vec() + dt * bicycle_rates(pose, delta, v, params));
}

VehiclePose rk4_step(const VehiclePose& pose, double delta, double v, double dt,
                     const VehicleParams& params)
{
  const Eigen::Vector3d x0 = pose.vec();
  const Eigen::Vector3d k1 = bicycle_rates(pose, delta, v, params);
  const Eigen::Vector3d k2 = bicycle_rates(VehiclePose::from(x0 + 0.5 * dt * k1), delta, v, params);
  const Eigen::Vector3d k3 = bicycle_rates(VehiclePose::from(x0 + 0.5 * dt * k2), delta, v, params);
  const Eigen::Vector3d k4 = bicycle_rates(VehiclePose::from(x0 + dt * k3), delta, v, params);
  return VehiclePose::from(x0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

FrontEdges front_edges(const VehiclePose& pose, const VehicleParams& params)
{
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  const double half_w = 0.5 * params.w;
  const double fx = pose.x + params.l_f_prime * c;
  const double fy = pose.y + params.l_f_prime * s;
  return {fx - half_w * s, fy + half_w * c, fx + half_w * s, fy - half_w * c};
}

Eigen::Matrix<double, 4, 3> front_edges_jacobian(const VehiclePose& pose,
                                                 const VehicleParams& params)
{
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  const double half_w = 0.5 * params.w;
  const double lf = params.l_f_prime;
  Eigen::Matrix<double, 4, 3> J;
  J << 1.0, 0.0, -lf * s - half_w * c,
       0.0, 1.0,  lf * c - half_w * s,
       1.0, 0.0, -lf * s + half_w * c,
       0.0, 1.0,  lf * c + half_w * s;
  return J;
}

LinearizedStep linearize_dynamics(const VehiclePose& pose, double delta, double v, double dt,
                                  const VehicleParams& params)
{
  const double ratio = params.l_r / (params.l_f + params.l_r);
  const double tan_d = std::tan(delta);
  const double beta = std::atan(ratio * tan_d);
  // d(beta)/d(delta) = ratio * sec^2(delta) / (1 + ratio^2 tan^2(delta))
  const double sec2 = 1.0 + tan_d * tan_d;
  const double dbeta = ratio * sec2 / (1.0 + ratio * ratio * tan_d * tan_d);

  const double heading = pose.theta + beta;
  const double ch = std::cos(heading);
  const double sh = std::sin(heading);

  LinearizedStep lin;
  lin.A.setIdentity();
  lin.A(0, 2) = -dt * v * sh;
  lin.A(1, 2) = dt * v * ch;

  lin.B << -dt * v * sh * dbeta, dt * v * ch * dbeta,
      dt * v / params.l_r * std::cos(beta) * dbeta;

  const Eigen::Vector3d next = euler_step(pose, delta, v, dt, params).vec();
  lin.c = next - lin.A * pose.vec() - lin.B * delta;
  return lin;
}

}  // namespace semisteer
