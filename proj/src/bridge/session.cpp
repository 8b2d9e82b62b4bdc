#include "semisteer/bridge/session.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace semisteer::bridge {

using nlohmann::json;

Session::Session(int id, const Scenario& scenario, SessionMode mode)
    : id_(id), mode_(mode), loop_(scenario, true), held_ref_(scenario.initial_steering)
{
}

void Session::start()
{
  if (finished_) {
    throw std::logic_error("session finished; reset to run it again");
  }
  running_ = true;
}

void Session::stop() { running_ = false; }

void Session::reset()
{
  loop_.reset();
  running_ = false;
  finished_ = false;
  ++epoch_;
  overruns_ = 0;
  held_ref_ = loop_.scenario().initial_steering;
  client_time_ms_.reset();
}

void Session::steer(const SteerRequest& request)
{
  if (!std::isfinite(request.value)) {
    throw std::invalid_argument("steering input must be finite");
  }
  if (mode_ == SessionMode::simulated) {
    return;
  }
  const MpcConfig& cfg = loop_.scenario().mpc;
  double delta = request.value;
  if (request.normalized) {
    const double u = std::clamp(request.value, -1.0, 1.0);
    delta = u >= 0.0 ? u * cfg.delta_max : -u * cfg.delta_min;
  }
  held_ref_ = std::clamp(delta, cfg.delta_min, cfg.delta_max);
  client_time_ms_ = request.client_time_ms;
}

void Session::set_speed(double v) { loop_.set_speed(v); }

StateMessage Session::advance(double deadline)
{
  if (!running_) {
    throw std::logic_error("session is not running");
  }
  TickRecord rec = mode_ == SessionMode::live ? loop_.step(held_ref_, deadline)
                                              : loop_.step(std::nullopt, deadline);
  if (rec.overrun) {
    ++overruns_;
  }
  if (mode_ == SessionMode::simulated && loop_.tick() >= loop_.scenario().num_ticks()) {
    finished_ = true;
    running_ = false;
  }

  StateMessage m;
  m.session_id = id_;
  m.epoch = epoch_;
  m.alpha = loop_.scenario().alpha;
  m.intervention = std::abs(rec.delta_applied - rec.delta_ref) > kInterventionThreshold;
  m.overruns = overruns_;
  m.running = running_;
  m.finished = finished_;
  m.client_time_ms = client_time_ms_;
  m.record = std::move(rec);
  return m;
}

json Session::attach_message() const
{
  const Scenario& s = loop_.scenario();
  json obstacles = json::array();
  for (const auto& o : s.obstacles) {
    json corners = json::array();
    for (const auto& c : o.corners()) corners.push_back({c.x(), c.y()});
    obstacles.push_back({{"x_m", o.x_e},
                         {"y_m", o.y_e},
                         {"heading_rad", o.phi},
                         {"length_m", o.length},
                         {"width_m", o.width},
                         {"corners", corners}});
  }
  json contours = json::array();
  for (const auto& o : s.obstacles) {
    for (const auto& poly : emit_contours(bound_rectangle(o, s.ellipse_order), {0.0}, 128)) {
      json pts = json::array();
      for (const auto& p : poly) pts.push_back({p.x(), p.y()});
      contours.push_back(pts);
    }
  }
  json path = json::array();
  for (const auto& p : s.path) path.push_back({p.x(), p.y()});
  const VehiclePose& pose = loop_.pose();
  return {{"type", "session"},
          {"v", kProtocolVersion},
          {"session_id", id_},
          {"mode", to_string(mode_)},
          {"scenario", s.name},
          {"scenario_hash", scenario_hash(s)},
          {"alpha", s.alpha},
          {"ellipse_order", s.ellipse_order},
          {"t_s", s.mpc.t_s},
          {"delta_min_rad", s.mpc.delta_min},
          {"delta_max_rad", s.mpc.delta_max},
          {"rate_min_rad_s", s.mpc.rate_min},
          {"rate_max_rad_s", s.mpc.rate_max},
          {"speed_mps", loop_.speed()},
          {"duration_s", s.duration},
          {"vehicle",
           {{"l_f_m", s.vehicle.l_f},
            {"l_r_m", s.vehicle.l_r},
            {"l_f_prime_m", s.vehicle.l_f_prime},
            {"width_m", s.vehicle.w}}},
          {"obstacles", obstacles},
          {"contours", contours},
          {"path", path},
          {"epoch", epoch_},
          {"tick", loop_.tick()},
          {"pose", {{"x", pose.x}, {"y", pose.y}, {"theta", pose.theta}}}};
}

int SessionManager::open_session(const OpenRequest& request)
{
  Scenario scenario;
  try {
    scenario = request.document ? scenario_from_json(*request.document)
                                : load_bundled_scenario(request.scenario);
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("scenario: ") + e.what());
  }
  return open_session(scenario, request.mode);
}

int SessionManager::open_session(const Scenario& scenario, SessionMode mode)
{
  scenario.validate();
  std::lock_guard lock(mutex_);
  auto session = std::make_shared<Session>(next_id_, scenario, mode);
  sessions_.emplace(next_id_, std::move(session));
  return next_id_++;
}

std::shared_ptr<Session> SessionManager::find(int id) const
{
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

bool SessionManager::close_session(int id)
{
  std::lock_guard lock(mutex_);
  return sessions_.erase(id) > 0;
}

std::size_t SessionManager::count() const
{
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

SimTrace replay_states(const Scenario& scenario, const std::vector<StateMessage>& states)
{
  SimTrace trace;
  trace.meta = make_trace_meta(scenario, true);
  for (const auto& m : states) {
    if (!trace.records.empty() && m.record.tick <= trace.records.back().tick) {
      throw std::invalid_argument("state messages out of order");
    }
    trace.records.push_back(m.record);
    if (m.record.fault && !trace.meta.faulted) {
      trace.meta.faulted = true;
      trace.meta.fault_tick = m.record.tick;
    }
  }
  return trace;
}

}  // namespace semisteer::bridge
