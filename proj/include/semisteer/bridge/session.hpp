#pragma once

#include "semisteer/bridge/protocol.hpp"
#include "semisteer/scenario.hpp"
#include "semisteer/sim.hpp"

#include <json.hpp>

#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>

namespace semisteer::bridge {

/// Steering difference above which the controller counts as intervening [rad].
inline constexpr double kInterventionThreshold = 0.5 * 3.14159265358979323846 / 180.0;

/// One closed loop driven by its owner one period at a time. Not thread safe;
/// the owner serializes all calls.
class Session {
public:
  Session(int id, const Scenario& scenario, SessionMode mode);

  int id() const { return id_; }
  SessionMode mode() const { return mode_; }
  const Scenario& scenario() const { return loop_.scenario(); }
  bool running() const { return running_; }
  bool finished() const { return finished_; }
  int epoch() const { return epoch_; }
  int tick() const { return loop_.tick(); }
  int overruns() const { return overruns_; }
  bool faulted() const { return loop_.faulted(); }
  const VehiclePose& pose() const { return loop_.pose(); }
  double held_reference() const { return held_ref_; }

  void start();
  void stop();
  /// Restores the initial state, pauses and starts a new epoch.
  void reset();

  /// Latest-wins steering input; clamped to the steering limits. Ignored in
  /// simulated mode, where the simulated teleoperator steers.
  void steer(const SteerRequest& request);
  void set_speed(double v);

  /// Advances one period and returns its state message. Live sessions use the
  /// most recent steering input (held if none arrived). A solve slower than
  /// `deadline` is discarded and the previous steering held. Simulated
  /// sessions finish after the scenario duration. Throws std::logic_error when
  /// not running.
  StateMessage advance(double deadline = std::numeric_limits<double>::infinity());

  /// Static description sent once when a client attaches: limits, obstacle
  /// rectangles, their zero-level contours and the path.
  nlohmann::json attach_message() const;

private:
  int id_;
  SessionMode mode_;
  ClosedLoop loop_;
  bool running_ = false;
  bool finished_ = false;
  int epoch_ = 0;
  int overruns_ = 0;
  double held_ref_;
  std::optional<double> client_time_ms_;
};

/// Thread-safe registry of open sessions.
class SessionManager {
public:
  /// Validates the request and creates a paused session. Throws
  /// std::invalid_argument (and allocates nothing) for an unusable scenario.
  int open_session(const OpenRequest& request);
  int open_session(const Scenario& scenario, SessionMode mode);

  std::shared_ptr<Session> find(int id) const;
  bool close_session(int id);
  std::size_t count() const;

private:
  mutable std::mutex mutex_;
  std::map<int, std::shared_ptr<Session>> sessions_;
  int next_id_ = 1;
};

/// Rebuilds the trace a headless run would have logged from a stream of
/// state messages of one epoch.
SimTrace replay_states(const Scenario& scenario, const std::vector<StateMessage>& states);

}  // namespace semisteer::bridge
