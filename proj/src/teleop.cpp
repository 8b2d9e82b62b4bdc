#include "semisteer/teleop.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace semisteer {

DesiredPath::DesiredPath(std::vector<Eigen::Vector2d> waypoints) : waypoints_(std::move(waypoints))
{
  if (waypoints_.size() < 2) {
    throw std::invalid_argument("desired path needs at least two waypoints");
  }
  for (std::size_t k = 0; k + 1 < waypoints_.size(); ++k) {
    const Eigen::Vector2d d = waypoints_[k + 1] - waypoints_[k];
    if (!(d.norm() > 0.0)) {
      throw std::invalid_argument("desired path has repeated waypoints");
    }
    headings_.push_back(std::atan2(d.y(), d.x()));
  }
}

void TeleopGains::validate() const
{
  if (!std::isfinite(gamma1) || !std::isfinite(gamma2)) {
    throw std::invalid_argument("teleoperator gains must be finite");
  }
  if (!(gamma3 >= 0.0 && gamma3 <= 1.0)) {
    throw std::invalid_argument("gamma3 must lie in [0, 1]");
  }
}

double wrap_angle(double a)
{
  double r = std::remainder(a, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) {
    r += 2.0 * std::numbers::pi;
  }
  return r;
}

namespace {

struct Projection {
  double t = 0.0;         // unclamped parameter along the segment
  double distance = 0.0;  // to the (possibly extended) segment
  double signed_lateral = 0.0;
};

Projection project(const Eigen::Vector2d& p, const DesiredPath& path, std::size_t k)
{
  const auto& wp = path.waypoints();
  const Eigen::Vector2d a = wp[k];
  const Eigen::Vector2d d = wp[k + 1] - a;
  const double len2 = d.squaredNorm();
  Projection out;
  out.t = (p - a).dot(d) / len2;

  double t = out.t;
  if (k > 0) t = std::max(t, 0.0);
  if (k + 1 < path.num_segments()) t = std::min(t, 1.0);
  const Eigen::Vector2d closest = a + t * d;
  const Eigen::Vector2d r = p - closest;
  const double cross = d.x() * r.y() - d.y() * r.x();
  out.distance = r.norm();
  out.signed_lateral = cross >= 0.0 ? out.distance : -out.distance;
  return out;
}

}  // namespace

PathErrors path_errors(const VehiclePose& pose, const DesiredPath& path, std::size_t start_segment)
{
  const Eigen::Vector2d p{pose.x, pose.y};
  std::size_t k = std::min(start_segment, path.num_segments() - 1);
  Projection proj = project(p, path, k);
  while (k + 1 < path.num_segments() && proj.t >= 1.0) {
    ++k;
    proj = project(p, path, k);
  }
  PathErrors e;
  e.segment = k;
  e.lateral = proj.signed_lateral;
  e.heading = wrap_angle(pose.theta - path.segment_heading(k));
  return e;
}

double fbl_steering(double e_lateral, double e_heading, double v, const TeleopGains& gains,
                    double min_speed)
{
  if (v <= min_speed) {
    return 0.0;
  }
  const double num = -gains.gamma1 * e_lateral - gains.gamma2 * v * std::sin(e_heading);
  const double den = v * v * std::cos(e_heading);
  return std::atan(num / den);
}

double teleop_reference(double delta_fbl, double delta_applied_prev, double gamma3)
{
  return delta_fbl + gamma3 * (delta_applied_prev - delta_fbl);
}

SimulatedTeleoperator::SimulatedTeleoperator(DesiredPath path, TeleopGains gains)
    : path_(std::move(path)), gains_(gains)
{
  gains_.validate();
}

SimulatedTeleoperator::Output SimulatedTeleoperator::step(const VehiclePose& pose, double v)
{
  Output out;
  out.errors = path_errors(pose, path_, segment_);
  segment_ = out.errors.segment;
  out.delta_fbl = fbl_steering(out.errors.lateral, out.errors.heading, v, gains_);
  const double prev = has_applied_ ? last_applied_ : out.delta_fbl;
  out.delta_ref = teleop_reference(out.delta_fbl, prev, gains_.gamma3);
  return out;
}

void SimulatedTeleoperator::reset()
{
  segment_ = 0;
  last_applied_ = 0.0;
  has_applied_ = false;
}

}  // namespace semisteer
