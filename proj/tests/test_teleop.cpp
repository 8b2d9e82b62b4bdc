#include "semisteer/teleop.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace semisteer;

namespace {

constexpr double kPi = std::numbers::pi;

DesiredPath dogleg()
{
  return DesiredPath({{0.0, 0.0}, {10.0, 0.0}, {10.0, 10.0}});
}

}  // namespace

TEST_CASE("wrap angle")
{
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(3.0 * kPi / 2.0) == doctest::Approx(-kPi / 2.0));
  CHECK(wrap_angle(7.0) == doctest::Approx(7.0 - 2.0 * kPi));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> a(-50.0, 50.0);
  for (int k = 0; k < 1000; ++k) {
    const double x = a(rng);
    const double w = wrap_angle(x);
    CHECK(w > -kPi);
    CHECK(w <= kPi);
    CHECK(std::abs(std::remainder(x - w, 2.0 * kPi)) < 1e-12);
  }
}

TEST_CASE("path errors")
{
  const DesiredPath path = dogleg();
  CHECK(path.num_segments() == 2);
  CHECK(path.segment_heading(1) == doctest::Approx(kPi / 2.0));

  PathErrors e = path_errors({3.0, 0.5, 0.2}, path);
  CHECK(e.segment == 0);
  CHECK(e.lateral == doctest::Approx(0.5));
  CHECK(e.heading == doctest::Approx(0.2));

  e = path_errors({3.0, -0.5, -0.1}, path);
  CHECK(e.lateral == doctest::Approx(-0.5));
  CHECK(e.heading == doctest::Approx(-0.1));

  // the first segment extends behind its start
  e = path_errors({-4.0, 1.0, 0.0}, path);
  CHECK(e.segment == 0);
  CHECK(e.lateral == doctest::Approx(1.0));

  // past the corner the second segment takes over; right of a northbound path is +x
  e = path_errors({10.5, 4.0, kPi / 2.0}, path);
  CHECK(e.segment == 1);
  CHECK(e.lateral == doctest::Approx(-0.5));
  CHECK(e.heading == doctest::Approx(0.0).epsilon(1e-12));

  // the last segment extends beyond its end
  e = path_errors({9.0, 20.0, kPi}, path, 1);
  CHECK(e.lateral == doctest::Approx(1.0));
  CHECK(e.heading == doctest::Approx(kPi / 2.0));
}

TEST_CASE("segment index never moves back")
{
  const DesiredPath path = dogleg();
  // this point projects onto the first segment, but segment 1 was already reached
  const PathErrors e = path_errors({5.0, 0.2, 0.0}, path, 1);
  CHECK(e.segment == 1);
  CHECK(e.lateral == doctest::Approx(5.0));

  SimulatedTeleoperator op(path, TeleopGains{});
  CHECK(op.step({11.0, 2.0, kPi / 2.0}, 3.0).errors.segment == 1);
  CHECK(op.step({5.0, 0.2, 0.0}, 3.0).errors.segment == 1);
  op.reset();
  CHECK(op.step({5.0, 0.2, 0.0}, 3.0).errors.segment == 0);
}

TEST_CASE("invalid paths and gains")
{
  CHECK_THROWS_AS(DesiredPath({{0.0, 0.0}}), std::invalid_argument);
  CHECK_THROWS_AS(DesiredPath({{0.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}}), std::invalid_argument);
  TeleopGains g;
  g.gamma3 = 1.5;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  g.gamma3 = -0.1;
  CHECK_THROWS_AS(SimulatedTeleoperator(dogleg(), g), std::invalid_argument);
  g = TeleopGains{};
  g.gamma2 = std::nan("");
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}

TEST_CASE("feedback-linearized steering")
{
  const TeleopGains g;  // gamma1 = 0, gamma2 = 0.75
  // 40-digit reference (tests/oracles/derive_values.py)
  CHECK(fbl_steering(0.0, 0.1, 3.0, g) == doctest::Approx(-0.025078409205447459).epsilon(1e-14));
  CHECK(fbl_steering(0.0, 0.0, 3.0, g) == 0.0);
  CHECK(fbl_steering(2.0, 0.0, 3.0, g) == 0.0);

  TeleopGains lateral;
  lateral.gamma1 = 0.5;
  lateral.gamma2 = 1.25;
  CHECK(fbl_steering(1.0, 0.0, 2.0, lateral) == doctest::Approx(std::atan(-0.5 / 4.0)));
  CHECK(fbl_steering(1.0, 0.0, 2.0, lateral) < 0.0);
  CHECK(fbl_steering(-1.0, 0.0, 2.0, lateral) > 0.0);

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> el(-3.0, 3.0);
  std::uniform_real_distribution<double> eh(-1.4, 1.4);
  std::uniform_real_distribution<double> v(0.5, 10.0);
  for (int k = 0; k < 1000; ++k) {
    const double a = el(rng);
    const double h = eh(rng);
    const double s = v(rng);
    CHECK(fbl_steering(-a, -h, s, lateral) == doctest::Approx(-fbl_steering(a, h, s, lateral)));
    CHECK(std::abs(fbl_steering(a, h, s, lateral)) < kPi / 2.0);
  }

  CHECK(fbl_steering(1.0, 0.3, 0.05, lateral) == 0.0);
  CHECK(fbl_steering(1.0, 0.3, 0.0, lateral) == 0.0);
}

TEST_CASE("operator reference")
{
  CHECK(teleop_reference(0.2, 0.0, 0.0) == 0.2);
  CHECK(teleop_reference(0.2, 0.0, 1.0) == 0.0);
  CHECK(teleop_reference(0.2, 0.0, 0.25) == doctest::Approx(0.15));
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> d(-0.6, 0.6);
  std::uniform_real_distribution<double> g(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const double a = d(rng);
    const double b = d(rng);
    const double r = teleop_reference(a, b, g(rng));
    CHECK(r >= std::min(a, b) - 1e-15);
    CHECK(r <= std::max(a, b) + 1e-15);
  }
}

TEST_CASE("first tick blends with the tracker itself")
{
  TeleopGains g;
  g.gamma1 = 0.5;
  g.gamma3 = 0.25;
  SimulatedTeleoperator op(DesiredPath({{0.0, 0.0}, {50.0, 0.0}}), g);
  const auto first = op.step({0.0, 1.0, 0.0}, 3.0);
  CHECK(first.delta_ref == first.delta_fbl);
  op.observe_applied(0.0);
  const auto second = op.step({0.0, 1.0, 0.0}, 3.0);
  CHECK(second.delta_ref == doctest::Approx(0.75 * second.delta_fbl));
}

TEST_CASE("lateral gains bring the vehicle onto an offset path")
{
  TeleopGains g;
  g.gamma1 = 0.5;
  g.gamma2 = 1.25;
  g.gamma3 = 0.25;
  SimulatedTeleoperator op(DesiredPath({{-10.0, 0.0}, {200.0, 0.0}}), g);
  const VehicleParams p;
  VehiclePose pose{0.0, 2.0, 0.0};
  double worst_late = 0.0;
  std::vector<double> errors;
  for (int k = 0; k < 600; ++k) {
    const auto out = op.step(pose, 3.0);
    errors.push_back(out.errors.lateral);
    if (k >= 400) worst_late = std::max(worst_late, std::abs(out.errors.lateral));
    op.observe_applied(out.delta_ref);
    pose = rk4_step(pose, out.delta_ref, 3.0, 0.05, p);
  }
  CHECK(worst_late < 0.05);

  // peak |e| between successive zero crossings shrinks after the first overshoot
  std::vector<double> peaks;
  double peak = 0.0;
  for (std::size_t k = 1; k < errors.size(); ++k) {
    if ((errors[k] < 0.0) != (errors[k - 1] < 0.0)) {
      peaks.push_back(peak);
      peak = 0.0;
    }
    peak = std::max(peak, std::abs(errors[k]));
  }
  REQUIRE(peaks.size() >= 3);
  CHECK(peaks[1] < 0.1 * peaks[0]);
  for (std::size_t i = 2; i < peaks.size(); ++i) CHECK(peaks[i] < peaks[i - 1]);
}
