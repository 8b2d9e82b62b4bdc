#pragma once

#include "semisteer/mpc.hpp"
#include "semisteer/scenario.hpp"
#include "semisteer/teleop.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace semisteer {

/// One control period of a closed-loop run.
struct TickRecord {
  int tick = 0;
  double time = 0.0;
  VehiclePose pose;
  FrontEdges edges;
  double speed = 0.0;
  double lateral_error = 0.0;
  double heading_error = 0.0;
  double delta_fbl = 0.0;
  double delta_ref = 0.0;
  double delta_applied = 0.0;
  double p_fl = 0.0;
  double p_fr = 0.0;
  CostTerms cost;
  int sqp_iters = 0;
  bool slack_used = false;
  bool fault = false;
  double max_predicted_potential = 0.0;
  bool overrun = false;     ///< solve missed its deadline; previous steering held
  double solve_time = 0.0;  ///< wall clock of the controller solve [s]
};

struct TraceMeta {
  std::string scenario;
  std::string scenario_hash;
  bool assisted = false;
  std::uint64_t seed = 0;
  double alpha = 1.0;
  double t_s = 0.05;
  int ellipse_order = 4;
  std::vector<RectObstacle> obstacles;
  std::vector<Eigen::Vector2d> path;
  bool faulted = false;
  int fault_tick = -1;
};

struct SimTrace {
  TraceMeta meta;
  std::vector<TickRecord> records;

  double max_potential() const;
};

/// Step-by-step closed loop: teleoperator (or an external reference), optional
/// controller, RK4 plant. Both the headless runner and live sessions drive it.
class ClosedLoop {
public:
  ClosedLoop(const Scenario& scenario, bool assisted);

  /// Advances one sampling period. With external_ref the simulated teleoperator
  /// is bypassed and the value (clamped to the steering limits) is the reference.
  /// A solve slower than `deadline` seconds is discarded and the previous
  /// steering is held for the period (record flagged as overrun).
  TickRecord step(std::optional<double> external_ref = std::nullopt,
                  double deadline = std::numeric_limits<double>::infinity());

  /// Re-applies the previous steering for one period without solving.
  TickRecord hold_step(double reference);

  void set_speed(double v);
  void reset();

  const Scenario& scenario() const { return scenario_; }
  const FieldSpec& field() const { return field_; }
  const VehiclePose& pose() const { return pose_; }
  double speed() const { return speed_; }
  int tick() const { return tick_; }
  bool faulted() const { return faulted_; }
  int fault_tick() const { return fault_tick_; }
  bool assisted() const { return assisted_; }
  double last_applied() const { return last_applied_; }
  const std::optional<SteeringSolution>& last_solution() const { return last_solution_; }
  SteeringController& controller() { return controller_; }

private:
  TickRecord begin_record(double delta_ref, double delta_fbl, const PathErrors& errors) const;
  void advance(TickRecord& rec);

  Scenario scenario_;
  bool assisted_;
  FieldSpec field_;
  SteeringController controller_;
  SimulatedTeleoperator teleop_;
  VehiclePose pose_;
  double speed_;
  double last_applied_;
  int tick_ = 0;
  bool faulted_ = false;
  int fault_tick_ = -1;
  std::optional<SteeringSolution> last_solution_;
};

/// Clamp a steering command to the magnitude limits and the one-period rate limit.
double clip_steering(double delta, double delta_prev, const MpcConfig& config);

TraceMeta make_trace_meta(const Scenario& scenario, bool assisted);
SimTrace run_scenario(const Scenario& scenario, bool assisted);

/// Lane-change helper: lateral distance of the final pose to the path's last segment.
double final_lane_offset(const SimTrace& trace);

struct TimingSummary {
  int ticks = 0;
  double median = 0.0;
  double p95 = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

/// Wall-clock statistics of the controller solve over an assisted run of
/// `ticks` periods (the scenario duration is ignored). Throws for ticks < 100.
TimingSummary benchmark(const Scenario& scenario, int ticks);

// Trace serialization: one JSON header line, then one JSON object per tick.
nlohmann::json tick_to_json(const TickRecord& r, bool include_timing = true);
TickRecord tick_from_json(const nlohmann::json& j);
void write_trace(std::ostream& os, const SimTrace& trace, bool include_timing = true);
SimTrace read_trace(std::istream& is);

enum class PlotKind { trajectory, steering, potential, ellipses };
PlotKind parse_plot_kind(const std::string& kind);
std::string to_string(PlotKind kind);

/// Writes whitespace-separated column files plus manifest.json into out_dir.
/// Returns the files written (manifest last).
std::vector<std::filesystem::path> export_plot_data(const SimTrace& trace, PlotKind kind,
                                                    const std::filesystem::path& out_dir);

/// Writes polylines as "x y" lines with a blank line between polylines; each
/// polyline is closed by repeating its first point.
void write_polylines(std::ostream& os, const std::vector<Polyline>& polylines);

/// Log level from SEMISTEER_LOG (error, warn, info, debug); default warn.
enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };
LogLevel log_level();
void log(LogLevel level, const std::string& message);

}  // namespace semisteer
