#include "semisteer/field.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace semisteer {

namespace {

// q^k by repeated squaring; k >= 0.
double ipow(double q, int k)
{
  double result = 1.0;
  while (k > 0) {
    if (k & 1) {
      result *= q;
    }
    q *= q;
    k >>= 1;
  }
  return result;
}

void check_order(int n)
{
  if (n < 2 || n % 2 != 0) {
    throw std::invalid_argument("ellipse order must be an even integer >= 2, got " +
                                std::to_string(n));
  }
}

Eigen::Matrix2d rotation(double phi)
{
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  Eigen::Matrix2d R;
  R << c, -s, s, c;
  return R;
}

}  // namespace

void RectObstacle::validate() const
{
  if (!(length > 0.0 && width > 0.0)) {
    throw std::invalid_argument("obstacle length and width must be positive");
  }
}

std::vector<Eigen::Vector2d> RectObstacle::corners() const
{
  const Eigen::Matrix2d R = rotation(phi);
  const Eigen::Vector2d c{x_e, y_e};
  const double hl = 0.5 * length;
  const double hw = 0.5 * width;
  return {c + R * Eigen::Vector2d{hl, hw}, c + R * Eigen::Vector2d{-hl, hw},
          c + R * Eigen::Vector2d{-hl, -hw}, c + R * Eigen::Vector2d{hl, -hw}};
}

void FieldSpec::validate() const
{
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("potential strength alpha must be positive");
  }
  if (!(slope_exp > 0.0)) {
    throw std::invalid_argument("potential slope exponent must be positive");
  }
  if (!(eps_floor > 0.0 && eps_floor < 1e-3)) {
    throw std::invalid_argument("eps_floor must lie in (0, 1e-3)");
  }
  for (const auto& e : bounds) {
    check_order(e.n);
    if (!(e.a > 0.0 && e.b > 0.0)) {
      throw std::invalid_argument("ellipse semi-axes must be positive");
    }
  }
}

double scale_factor(int n)
{
  check_order(n);
  return std::pow(2.0, 1.0 / n);
}

EllipseBound bound_rectangle(const RectObstacle& rect, int n)
{
  rect.validate();
  const double f = scale_factor(n);
  return {rect.x_e, rect.y_e, rect.phi, f * rect.length / 2.0, f * rect.width / 2.0, n};
}

double shape_value(const Eigen::Vector2d& p, const EllipseBound& e)
{
  const double dx = p.x() - e.x_e;
  const double dy = p.y() - e.y_e;
  const double c = std::cos(e.phi);
  const double s = std::sin(e.phi);
  const double u = (c * dx + s * dy) / e.a;
  const double v = (-s * dx + c * dy) / e.b;
  const int half = e.n / 2;
  return ipow(u * u, half) + ipow(v * v, half) - 1.0;
}

ShapeDerivatives shape_derivatives(const Eigen::Vector2d& p, const EllipseBound& e)
{
  const double dx = p.x() - e.x_e;
  const double dy = p.y() - e.y_e;
  const double c = std::cos(e.phi);
  const double s = std::sin(e.phi);
  const double u = (c * dx + s * dy) / e.a;
  const double v = (-s * dx + c * dy) / e.b;
  const int n = e.n;
  const int half = n / 2;

  // u^(n-2) and v^(n-2) are even powers
  const double u_nm2 = ipow(u * u, half - 1);
  const double v_nm2 = ipow(v * v, half - 1);

  ShapeDerivatives d;
  d.s = u_nm2 * u * u + v_nm2 * v * v - 1.0;

  // derivatives in the obstacle frame
  const Eigen::Vector2d g_local{n * u_nm2 * u / e.a, n * v_nm2 * v / e.b};
  Eigen::Matrix2d h_local = Eigen::Matrix2d::Zero();
  h_local(0, 0) = n * (n - 1) * u_nm2 / (e.a * e.a);
  h_local(1, 1) = n * (n - 1) * v_nm2 / (e.b * e.b);

  const Eigen::Matrix2d R = rotation(e.phi);
  d.grad = R * g_local;
  d.hess = R * h_local * R.transpose();
  return d;
}

PotentialEval potential_eval(const Eigen::Vector2d& p, const FieldSpec& spec)
{
  PotentialEval out;
  const double beta = spec.slope_exp;
  for (const auto& e : spec.bounds) {
    const ShapeDerivatives sd = shape_derivatives(p, e);
    const double d = sd.s + 1.0;
    if (d <= spec.eps_floor) {
      out.value += spec.alpha * std::pow(spec.eps_floor, -beta);
      continue;
    }
    const double p0 = spec.alpha * std::pow(d, -beta);
    const double p1 = -beta * p0 / d;                       // dP/ds
    const double p2 = beta * (beta + 1.0) * p0 / (d * d);   // d2P/ds2
    out.value += p0;
    out.grad += p1 * sd.grad;
    out.hess += p2 * sd.grad * sd.grad.transpose() + p1 * sd.hess;
  }
  return out;
}

double potential_value(const Eigen::Vector2d& p, const FieldSpec& spec)
{
  double total = 0.0;
  for (const auto& e : spec.bounds) {
    const double d = std::max(shape_value(p, e) + 1.0, spec.eps_floor);
    total += spec.alpha * std::pow(d, -spec.slope_exp);
  }
  return total;
}

Eigen::Vector2d potential_gradient(const Eigen::Vector2d& p, const FieldSpec& spec)
{
  return potential_eval(p, spec).grad;
}

Eigen::Matrix2d potential_hessian(const Eigen::Vector2d& p, const FieldSpec& spec)
{
  return potential_eval(p, spec).hess;
}

std::vector<Polyline> emit_contours(const EllipseBound& e, const std::vector<double>& levels,
                                    int samples_per_contour)
{
  check_order(e.n);
  if (samples_per_contour < 16) {
    throw std::invalid_argument("contours need at least 16 samples");
  }
  const Eigen::Matrix2d R = rotation(e.phi);
  const Eigen::Vector2d center{e.x_e, e.y_e};
  const double expo = 2.0 / e.n;

  std::vector<Polyline> out;
  out.reserve(levels.size());
  for (double level : levels) {
    if (!(level > -1.0)) {
      throw std::invalid_argument("contour level must exceed -1");
    }
    const double r = std::pow(level + 1.0, 1.0 / e.n);
    Polyline poly;
    poly.reserve(static_cast<std::size_t>(samples_per_contour));
    for (int k = 0; k < samples_per_contour; ++k) {
      const double t = 2.0 * std::numbers::pi * k / samples_per_contour;
      const double ct = std::cos(t);
      const double st = std::sin(t);
      const double u = r * std::copysign(std::pow(std::abs(ct), expo), ct);
      const double v = r * std::copysign(std::pow(std::abs(st), expo), st);
      poly.push_back(center + R * Eigen::Vector2d{e.a * u, e.b * v});
    }
    out.push_back(std::move(poly));
  }
  return out;
}

double polygon_area(const Polyline& poly)
{
  double twice = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % n];
    twice += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * twice;
}

}  // namespace semisteer
