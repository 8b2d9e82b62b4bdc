#pragma once

#include <Eigen/Dense>

#include <vector>

namespace semisteer {

/// Rectangular obstacle footprint. phi rotates the rectangle about its center.
struct RectObstacle {
  double x_e = 0.0;
  double y_e = 0.0;
  double phi = 0.0;
  double length = 1.0;  ///< along the obstacle's local x axis
  double width = 1.0;   ///< along the obstacle's local y axis

  void validate() const;
  /// Corners in counter-clockwise order starting at local (+L/2, +W/2).
  std::vector<Eigen::Vector2d> corners() const;
};

/// Superellipse of even order n:
///   s(p) = (u/a)^n + (v/b)^n - 1,   (u, v) = R(-phi) (p - center)
struct EllipseBound {
  double x_e = 0.0;
  double y_e = 0.0;
  double phi = 0.0;
  double a = 1.0;
  double b = 1.0;
  int n = 2;
};

/// Sum of repulsive potentials alpha / (s + 1)^slope_exp over a set of bounds.
struct FieldSpec {
  std::vector<EllipseBound> bounds;
  double alpha = 1.0;
  double slope_exp = 1.0;
  double eps_floor = 1e-9;

  void validate() const;
};

/// Semi-axis scale that puts the rectangle corners exactly on the s = 0 contour.
/// Throws std::invalid_argument for odd or < 2 orders.
double scale_factor(int n);

EllipseBound bound_rectangle(const RectObstacle& rect, int n);

double shape_value(const Eigen::Vector2d& p, const EllipseBound& e);

/// Value, gradient and Hessian of s with respect to the query point.
struct ShapeDerivatives {
  double s = 0.0;
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
};
ShapeDerivatives shape_derivatives(const Eigen::Vector2d& p, const EllipseBound& e);

double potential_value(const Eigen::Vector2d& p, const FieldSpec& spec);
Eigen::Vector2d potential_gradient(const Eigen::Vector2d& p, const FieldSpec& spec);
Eigen::Matrix2d potential_hessian(const Eigen::Vector2d& p, const FieldSpec& spec);

/// All three at once; this is what the controller calls in its inner loop.
struct PotentialEval {
  double value = 0.0;
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
};
PotentialEval potential_eval(const Eigen::Vector2d& p, const FieldSpec& spec);

using Polyline = std::vector<Eigen::Vector2d>;

/// Closed polylines tracing s = level for each entry of levels. The first point
/// is not repeated at the end. Throws for level <= -1 or fewer than 16 samples.
std::vector<Polyline> emit_contours(const EllipseBound& e, const std::vector<double>& levels,
                                    int samples_per_contour);

/// Shoelace area of a closed polyline (positive for counter-clockwise order).
double polygon_area(const Polyline& poly);

}  // namespace semisteer
