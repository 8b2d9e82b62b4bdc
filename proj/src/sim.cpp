#include "semisteer/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <stdexcept>

namespace semisteer {

double SimTrace::max_potential() const
{
  double worst = 0.0;
  for (const auto& r : records) {
    worst = std::max({worst, r.p_fl, r.p_fr});
  }
  return worst;
}

double clip_steering(double delta, double delta_prev, const MpcConfig& config)
{
  const double lo = std::max(config.delta_min, delta_prev + config.rate_min * config.t_s);
  const double hi = std::min(config.delta_max, delta_prev + config.rate_max * config.t_s);
  return std::clamp(delta, lo, hi);
}

ClosedLoop::ClosedLoop(const Scenario& scenario, bool assisted)
    : scenario_(scenario),
      assisted_(assisted),
      field_(scenario.field_spec()),
      controller_(scenario.mpc),
      teleop_(DesiredPath(scenario.path), scenario.gains),
      pose_(scenario.initial_pose),
      speed_(scenario.speed),
      last_applied_(scenario.initial_steering)
{
  scenario_.validate();
}

void ClosedLoop::set_speed(double v)
{
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument("speed must be finite and non-negative");
  }
  if (!faulted_) {
    speed_ = v;
  }
}

void ClosedLoop::reset()
{
  teleop_.reset();
  pose_ = scenario_.initial_pose;
  speed_ = scenario_.speed;
  last_applied_ = scenario_.initial_steering;
  tick_ = 0;
  faulted_ = false;
  fault_tick_ = -1;
  last_solution_.reset();
}

TickRecord ClosedLoop::begin_record(double delta_ref, double delta_fbl,
                                    const PathErrors& errors) const
{
  TickRecord rec;
  rec.tick = tick_;
  rec.time = tick_ * scenario_.mpc.t_s;
  rec.pose = pose_;
  rec.edges = front_edges(pose_, scenario_.vehicle);
  rec.speed = speed_;
  rec.lateral_error = errors.lateral;
  rec.heading_error = errors.heading;
  rec.delta_fbl = delta_fbl;
  rec.delta_ref = delta_ref;
  rec.p_fl = potential_value(rec.edges.left(), field_);
  rec.p_fr = potential_value(rec.edges.right(), field_);
  rec.fault = faulted_;
  return rec;
}

void ClosedLoop::advance(TickRecord& rec)
{
  teleop_.observe_applied(rec.delta_applied);
  pose_ = rk4_step(pose_, rec.delta_applied, speed_, scenario_.mpc.t_s, scenario_.vehicle);
  last_applied_ = rec.delta_applied;
  ++tick_;
}

TickRecord ClosedLoop::step(std::optional<double> external_ref, double deadline)
{
  const MpcConfig& cfg = scenario_.mpc;
  PathErrors errors;
  double delta_fbl = 0.0;
  double delta_ref = 0.0;
  if (external_ref) {
    if (!std::isfinite(*external_ref)) {
      throw std::invalid_argument("external steering reference must be finite");
    }
    delta_ref = std::clamp(*external_ref, cfg.delta_min, cfg.delta_max);
    delta_fbl = delta_ref;
    errors = path_errors(pose_, teleop_.path());
  } else {
    const auto out = teleop_.step(pose_, speed_);
    errors = out.errors;
    delta_fbl = out.delta_fbl;
    delta_ref = out.delta_ref;
  }

  TickRecord rec = begin_record(delta_ref, delta_fbl, errors);

  if (assisted_) {
    SteeringProblem problem{pose_, delta_ref, last_applied_, speed_, field_, scenario_.vehicle};
    SteeringSolution sol =
        controller_.solve(problem, last_solution_ ? &*last_solution_ : nullptr);
    rec.cost = sol.cost_terms;
    rec.sqp_iters = sol.sqp_iters;
    rec.slack_used = sol.slack_used;
    rec.max_predicted_potential = sol.max_predicted_potential;
    rec.solve_time = sol.solve_time;
    if (sol.fault && !faulted_) {
      faulted_ = true;
      fault_tick_ = tick_;
      speed_ = 0.0;
      log(LogLevel::warn, "controller fault at tick " + std::to_string(tick_) + ", stopping");
    }
    rec.fault = sol.fault || faulted_;
    if (sol.solve_time > deadline) {
      rec.overrun = true;
      rec.delta_applied = last_applied_;
    } else {
      rec.delta_applied = sol.applied();
      last_solution_ = std::move(sol);
    }
  } else {
    rec.delta_applied = clip_steering(delta_ref, last_applied_, cfg);
  }

  advance(rec);
  return rec;
}

TickRecord ClosedLoop::hold_step(double reference)
{
  PathErrors errors = path_errors(pose_, teleop_.path());
  TickRecord rec = begin_record(reference, reference, errors);
  rec.delta_applied = last_applied_;
  advance(rec);
  return rec;
}

TraceMeta make_trace_meta(const Scenario& scenario, bool assisted)
{
  TraceMeta meta;
  meta.scenario = scenario.name;
  meta.scenario_hash = scenario_hash(scenario);
  meta.assisted = assisted;
  meta.alpha = scenario.alpha;
  meta.t_s = scenario.mpc.t_s;
  meta.ellipse_order = scenario.ellipse_order;
  meta.obstacles = scenario.obstacles;
  meta.path = scenario.path;
  return meta;
}

SimTrace run_scenario(const Scenario& scenario, bool assisted)
{
  SimTrace trace;
  trace.meta = make_trace_meta(scenario, assisted);

  ClosedLoop loop(scenario, assisted);
  const int ticks = scenario.num_ticks();
  trace.records.reserve(static_cast<std::size_t>(ticks));
  for (int k = 0; k < ticks; ++k) {
    trace.records.push_back(loop.step());
  }
  trace.meta.faulted = loop.faulted();
  trace.meta.fault_tick = loop.fault_tick();
  return trace;
}

double final_lane_offset(const SimTrace& trace)
{
  if (trace.records.empty() || trace.meta.path.size() < 2) {
    throw std::invalid_argument("final_lane_offset needs a non-empty trace with a path");
  }
  const DesiredPath path(trace.meta.path);
  const auto& last = trace.records.back().pose;
  return std::abs(path_errors(last, path, path.num_segments() - 1).lateral);
}

TimingSummary benchmark(const Scenario& scenario, int ticks)
{
  if (ticks < 100) {
    throw std::invalid_argument("benchmark needs at least 100 ticks");
  }
  ClosedLoop loop(scenario, true);
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(ticks));
  for (int k = 0; k < ticks; ++k) {
    times.push_back(loop.step().solve_time);
  }
  TimingSummary out;
  out.ticks = ticks;
  double sum = 0.0;
  for (double t : times) sum += t;
  out.mean = sum / ticks;
  std::sort(times.begin(), times.end());
  const auto at = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::ceil(q * ticks)) - 1;
    return times[std::min(idx, times.size() - 1)];
  };
  out.median = (ticks % 2) ? times[static_cast<std::size_t>(ticks / 2)]
                           : 0.5 * (times[static_cast<std::size_t>(ticks / 2 - 1)] +
                                    times[static_cast<std::size_t>(ticks / 2)]);
  out.p95 = at(0.95);
  out.max = times.back();
  return out;
}

LogLevel log_level()
{
  static const LogLevel level = [] {
    const char* env = std::getenv("SEMISTEER_LOG");
    if (!env) return LogLevel::warn;
    const std::string v(env);
    if (v == "error") return LogLevel::error;
    if (v == "info") return LogLevel::info;
    if (v == "debug") return LogLevel::debug;
    return LogLevel::warn;
  }();
  return level;
}

void log(LogLevel level, const std::string& message)
{
  if (level > log_level()) {
    return;
  }
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::cerr << "[semisteer " << names[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace semisteer
