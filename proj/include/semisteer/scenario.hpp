#pragma once

#include "semisteer/field.hpp"
#include "semisteer/mpc.hpp"
#include "semisteer/teleop.hpp"
#include "semisteer/vehicle.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace semisteer {

inline constexpr int kScenarioSchemaVersion = 1;

/// Everything needed to reproduce one closed-loop run. Internal units are SI
/// with radians; the file format carries degrees where noted in the key names.
struct Scenario {
  std::string name;
  std::string description;
  VehicleParams vehicle;
  std::vector<RectObstacle> obstacles;
  int ellipse_order = 4;
  double alpha = 1.0;
  double slope_exp = 1.0;
  double eps_floor = 1e-9;
  std::vector<Eigen::Vector2d> path;
  double speed = 3.0;
  TeleopGains gains;
  MpcConfig mpc;
  VehiclePose initial_pose;
  double initial_steering = 0.0;
  double duration = 20.0;

  /// Throws std::invalid_argument with a diagnostic on any broken invariant.
  void validate() const;

  FieldSpec field_spec() const;
  int num_ticks() const;
};

nlohmann::json scenario_to_json(const Scenario& s);
/// Throws std::invalid_argument on schema errors (missing keys, wrong version, bad values).
Scenario scenario_from_json(const nlohmann::json& j);

Scenario load_scenario(const std::filesystem::path& file);

/// Resolves "parking_lot" / "lane_change" to the bundled files, otherwise treats
/// the argument as a path.
Scenario load_scenario_by_name(const std::string& name_or_path);

/// Directory holding the bundled scenario files.
std::filesystem::path bundled_scenario_dir();

/// Loads a bundled scenario by bare name (letters, digits, '_' and '-' only).
Scenario load_bundled_scenario(const std::string& name);

/// FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string scenario_hash(const Scenario& s);

}  // namespace semisteer
