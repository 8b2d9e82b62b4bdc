// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "semisteer/field.hpp"
#include "semisteer/mpc.hpp"
#include "semisteer/qp.hpp"
#include "semisteer/scenario.hpp"
#include "semisteer/sim.hpp"
#include "support/qp_oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace semisteer;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

RectObstacle random_rect(std::mt19937_64& rng)
{
  std::uniform_real_distribution<double> pos(-30.0, 30.0);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> size(0.3, 6.0);
  RectObstacle r;
  r.x_e = pos(rng);
  r.y_e = pos(rng);
  r.phi = ang(rng);
  r.length = size(rng);
  r.width = size(rng);
  return r;
}

// Closed-form area of |u/a|^n + |v/b|^n <= 1.
double superellipse_area(const EllipseBound& e)
{
  const double g = std::tgamma(1.0 + 1.0 / e.n);
  return 4.0 * e.a * e.b * g * g / std::tgamma(1.0 + 2.0 / e.n);
}

Outcome ellipse_anchoring()
{
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst_s = 0.0;
  bool areas_decrease = true;
  for (int k = 0; k < 100; ++k) {
    const RectObstacle r = random_rect(rng);
    double previous = std::numeric_limits<double>::infinity();
    for (int n : {2, 4, 6, 8}) {
      const EllipseBound e = bound_rectangle(r, n);
      for (const auto& c : r.corners()) worst_s = std::max(worst_s, std::abs(shape_value(c, e)));
      const double area = superellipse_area(e);
      const double polygon = polygon_area(emit_contours(e, {0.0}, 2048).front());
      areas_decrease &= area < previous && polygon < previous;
      previous = std::min(area, polygon);
    }
  }
  const double t = seconds_since(t0);
  return {worst_s <= 1e-12 && areas_decrease && t < 1.0,
          "max |s(corner)| = " + fmt("%.2e", worst_s) +
              (areas_decrease ? ", area decreasing in n" : ", area NOT decreasing") + ", " +
              fmt("%.3f s", t)};
}

Outcome derivatives()
{
  const auto t0 = Clock::now();
  FieldSpec f;
  RectObstacle a;
  a.phi = 0.3;
  a.length = 4.5;
  a.width = 1.8;
  RectObstacle b;
  b.x_e = 6.0;
  b.y_e = 2.5;
  b.phi = -0.8;
  b.length = 4.8;
  b.width = 2.0;
  f.bounds = {bound_rectangle(a, 4), bound_rectangle(b, 4)};

  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> px(-8.0, 14.0);
  std::uniform_real_distribution<double> py(-6.0, 9.0);
  const double h = 1e-6;
  double worst_g = 0.0;
  double worst_h = 0.0;
  int tested = 0;
  while (tested < 1000) {
    const Eigen::Vector2d p(px(rng), py(rng));
    // the eps clamp deep inside an obstacle is not differentiable
    bool clamped = false;
    for (const auto& e : f.bounds) clamped |= shape_value(p, e) + 1.0 < 1e-3;
    if (clamped) continue;
    ++tested;
    Eigen::Vector2d g_fd;
    Eigen::Matrix2d h_fd;
    for (int j = 0; j < 2; ++j) {
      const Eigen::Vector2d dp = p + h * Eigen::Vector2d::Unit(j);
      const Eigen::Vector2d dm = p - h * Eigen::Vector2d::Unit(j);
      g_fd(j) = (potential_value(dp, f) - potential_value(dm, f)) / (2 * h);
      h_fd.col(j) = (potential_gradient(dp, f) - potential_gradient(dm, f)) / (2 * h);
    }
    const PotentialEval pe = potential_eval(p, f);
    worst_g = std::max(worst_g, (pe.grad - g_fd).norm() / std::max(g_fd.norm(), 1e-3));
    worst_h = std::max(worst_h, (pe.hess - h_fd).norm() / std::max(h_fd.norm(), 1e-3));
  }
  const double t = seconds_since(t0);
  return {worst_g <= 1e-5 && worst_h <= 1e-4 && t < 5.0,
          "max rel. error gradient " + fmt("%.2e", worst_g) + ", Hessian " + fmt("%.2e", worst_h) +
              " over 1000 points, " + fmt("%.3f s", t)};
}

Outcome qp_oracle()
{
  const auto t0 = Clock::now();
  std::mt19937_64 rng(103);
  double worst_dz = 0.0;
  double worst_kkt = 0.0;
  int failures = 0;
  for (int k = 0; k < 200; ++k) {
    const QuadProgram qp = testing::random_qp(rng, false);
    const QpSolution s = solve_qp(qp);
    const auto ref = testing::brute_force_qp(qp);
    if (s.status != QpStatus::optimal || !ref) {
      ++failures;
      continue;
    }
    worst_dz = std::max(worst_dz, (s.z - *ref).lpNorm<Eigen::Infinity>());
    worst_kkt = std::max(worst_kkt, testing::kkt_violation(qp, s));
  }
  const double t = seconds_since(t0);
  return {failures == 0 && worst_dz <= 1e-7 && worst_kkt <= 1e-8 && t < 10.0,
          "200 QPs, max |dz| " + fmt("%.2e", worst_dz) + ", max KKT " + fmt("%.2e", worst_kkt) +
              ", " + std::to_string(failures) + " not optimal, " + fmt("%.3f s", t)};
}

Outcome transparency()
{
  SteeringController ctrl(MpcConfig{});
  const MpcConfig& c = ctrl.config();
  const VehicleParams vehicle;
  std::optional<SteeringSolution> prev;
  VehiclePose pose;
  double applied = 0.0;
  double worst = 0.0;
  for (int k = 0; k < 500; ++k) {
    // within +-35 deg and +-30 deg/s
    const double ref = 0.3 * std::sin(2.0 * std::numbers::pi * 0.25 * k * c.t_s);
    SteeringProblem p;
    p.xi0 = pose;
    p.delta_ref = ref;
    p.delta_prev = applied;
    p.v = 3.0;
    const SteeringSolution s = ctrl.solve(p, prev ? &*prev : nullptr);
    worst = std::max(worst, std::abs(s.applied() - ref));
    applied = s.applied();
    pose = rk4_step(pose, applied, p.v, c.t_s, vehicle);
    prev = s;
  }
  return {worst <= 1e-6, "500 ticks, max |delta_0 - delta_ref| = " + fmt("%.2e", worst)};
}

struct PairResult {
  double unassisted_max = 0.0;
  double assisted_max = 0.0;
  bool limits_exact = true;
  double unassisted_offset = 0.0;
  double assisted_offset = 0.0;
  double seconds = 0.0;
};

bool limits_exact(const SimTrace& t, const Scenario& s)
{
  double prev = s.initial_steering;
  for (const auto& r : t.records) {
    const double step = r.delta_applied - prev;
    if (r.delta_applied < s.mpc.delta_min || r.delta_applied > s.mpc.delta_max) return false;
    if (step > s.mpc.rate_max * s.mpc.t_s + 1e-12 || step < s.mpc.rate_min * s.mpc.t_s - 1e-12) {
      return false;
    }
    prev = r.delta_applied;
  }
  return true;
}

PairResult run_pair(const Scenario& s)
{
  PairResult out;
  const SimTrace u = run_scenario(s, false);
  const auto t0 = Clock::now();
  const SimTrace a = run_scenario(s, true);
  out.seconds = seconds_since(t0);
  out.unassisted_max = u.max_potential();
  out.assisted_max = a.max_potential();
  out.limits_exact = limits_exact(u, s) && limits_exact(a, s);
  out.unassisted_offset = final_lane_offset(u);
  out.assisted_offset = final_lane_offset(a);
  return out;
}

Outcome parking_lot()
{
  const Scenario s = load_bundled_scenario("parking_lot");
  const PairResult r = run_pair(s);
  const bool pass = r.unassisted_max > s.alpha && r.assisted_max <= 1.01 * s.alpha &&
                    r.limits_exact && r.seconds < 30.0;
  return {pass, "unassisted max P " + fmt("%.4f", r.unassisted_max) + ", assisted max P " +
                    fmt("%.4f", r.assisted_max) + " (alpha " + fmt("%.2f", s.alpha) + "), " +
                    (r.limits_exact ? "limits exact" : "LIMITS VIOLATED") + ", assisted run " +
                    fmt("%.2f s", r.seconds)};
}

Outcome lane_change()
{
  const Scenario s = load_bundled_scenario("lane_change");
  const PairResult r = run_pair(s);
  const bool pass = r.unassisted_max > s.alpha && r.assisted_max <= 1.01 * s.alpha &&
                    r.limits_exact && r.unassisted_offset < 0.2 && r.assisted_offset < 0.2;
  return {pass, "unassisted max P " + fmt("%.4f", r.unassisted_max) + ", assisted max P " +
                    fmt("%.4f", r.assisted_max) + ", final lane offset " +
                    fmt("%.3f", r.unassisted_offset) + " / " + fmt("%.3f m", r.assisted_offset) +
                    (r.limits_exact ? ", limits exact" : ", LIMITS VIOLATED")};
}

Outcome sqp_discipline()
{
  int worst_iters = 0;
  int shift_mismatches = 0;
  int ticks = 0;
  for (const char* name : {"parking_lot", "lane_change"}) {
    const Scenario s = load_bundled_scenario(name);
    ClosedLoop loop(s, true);
    std::optional<std::vector<double>> previous;
    for (int k = 0; k < s.num_ticks(); ++k) {
      const double applied_before = loop.last_applied();
      const TickRecord r = loop.step();
      const SteeringSolution& sol = *loop.last_solution();
      worst_iters = std::max(worst_iters, r.sqp_iters);
      const std::vector<double> expected =
          previous ? shift_sequence(*previous) : std::vector<double>(sol.delta_seq.size(), 0.0);
      if (sol.initial_guess != expected || sol.operating_points.empty() ||
          sol.operating_points.front() != project_admissible(expected, applied_before, s.mpc)) {
        ++shift_mismatches;
      }
      previous = sol.delta_seq;
      ++ticks;
    }
  }
  return {worst_iters <= 3 && shift_mismatches == 0,
          "max SQP iterations " + std::to_string(worst_iters) + " over " + std::to_string(ticks) +
              " ticks, first iterate is not the projected shift of the previous solution on " +
              std::to_string(shift_mismatches) + " ticks"};
}

Outcome timing()
{
  std::string detail;
  bool pass = true;
  for (const char* name : {"parking_lot", "lane_change"}) {
    const Scenario s = load_bundled_scenario(name);
    const TimingSummary t = benchmark(s, s.num_ticks());
    pass &= t.median < 0.060;
    detail += std::string(detail.empty() ? "" : ", ") + name + " median " +
              fmt("%.3f ms", 1e3 * t.median) + " (p95 " + fmt("%.3f ms", 1e3 * t.p95) + ")";
  }
  return {pass, detail + "; target < 30 ms, fails above 60 ms"};
}

}  // namespace

int main()
{
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"ellipse anchoring", ellipse_anchoring},
      {"potential derivatives", derivatives},
      {"QP oracle equivalence", qp_oracle},
      {"transparency", transparency},
      {"parking lot", parking_lot},
      {"lane change", lane_change},
      {"SQP discipline", sqp_discipline},
      {"timing", timing},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s  %-24s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
