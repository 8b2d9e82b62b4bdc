#include "semisteer/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace semisteer {

using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double deg(double rad) { return rad / kDeg; }
double rad(double deg) { return deg * kDeg; }

template <typename T>
T require(const json& j, const char* key, const std::string& where)
{
  if (!j.contains(key)) {
    throw std::invalid_argument("scenario: missing '" + std::string(key) + "' in " + where);
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument("scenario: bad value for '" + std::string(key) + "' in " + where +
                                ": " + e.what());
  }
}

template <typename T>
T optional(const json& j, const char* key, T fallback)
{
  if (!j.contains(key)) {
    return fallback;
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument("scenario: bad value for '" + std::string(key) + "': " + e.what());
  }
}

}  // namespace

void Scenario::validate() const
{
  if (name.empty()) throw std::invalid_argument("scenario: name must not be empty");
  vehicle.validate();
  for (const auto& o : obstacles) o.validate();
  field_spec().validate();
  if (ellipse_order < 2 || ellipse_order % 2 != 0) {
    throw std::invalid_argument("scenario: ellipse order must be even and >= 2");
  }
  DesiredPath check(path);
  gains.validate();
  mpc.validate();
  if (!(speed >= 0.0) || !std::isfinite(speed)) {
    throw std::invalid_argument("scenario: speed must be finite and non-negative");
  }
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw std::invalid_argument("scenario: duration must be positive");
  }
  if (!std::isfinite(initial_pose.x) || !std::isfinite(initial_pose.y) ||
      !std::isfinite(initial_pose.theta)) {
    throw std::invalid_argument("scenario: initial pose must be finite");
  }
  if (initial_steering < mpc.delta_min || initial_steering > mpc.delta_max) {
    throw std::invalid_argument("scenario: initial steering outside the steering limits");
  }
}

FieldSpec Scenario::field_spec() const
{
  FieldSpec spec;
  spec.alpha = alpha;
  spec.slope_exp = slope_exp;
  spec.eps_floor = eps_floor;
  for (const auto& o : obstacles) {
    spec.bounds.push_back(bound_rectangle(o, ellipse_order));
  }
  return spec;
}

int Scenario::num_ticks() const
{
  return static_cast<int>(std::llround(duration / mpc.t_s));
}

json scenario_to_json(const Scenario& s)
{
  json j;
  j["schema_version"] = kScenarioSchemaVersion;
  j["name"] = s.name;
  j["description"] = s.description;
  j["vehicle"] = {{"l_f_m", s.vehicle.l_f},
                  {"l_r_m", s.vehicle.l_r},
                  {"l_f_prime_m", s.vehicle.l_f_prime},
                  {"width_m", s.vehicle.w}};
  j["field"] = {{"ellipse_order", s.ellipse_order},
                {"alpha", s.alpha},
                {"slope_exp", s.slope_exp},
                {"eps_floor", s.eps_floor}};
  json obstacles = json::array();
  for (const auto& o : s.obstacles) {
    obstacles.push_back({{"x_m", o.x_e},
                         {"y_m", o.y_e},
                         {"heading_deg", deg(o.phi)},
                         {"length_m", o.length},
                         {"width_m", o.width}});
  }
  j["obstacles"] = obstacles;
  json waypoints = json::array();
  for (const auto& p : s.path) {
    waypoints.push_back({p.x(), p.y()});
  }
  j["path"] = {{"waypoints_m", waypoints}};
  j["speed_mps"] = s.speed;
  j["teleop"] = {{"gamma1", s.gains.gamma1}, {"gamma2", s.gains.gamma2}, {"gamma3", s.gains.gamma3}};
  const MpcConfig& m = s.mpc;
  j["mpc"] = {{"horizon", m.horizon},
              {"t_d_s", m.t_d},
              {"t_s_s", m.t_s},
              {"w_dref", m.w_dref},
              {"w_P", m.w_P},
              {"w_drate", m.w_drate},
              {"delta_min_deg", deg(m.delta_min)},
              {"delta_max_deg", deg(m.delta_max)},
              {"rate_min_deg_per_s", deg(m.rate_min)},
              {"rate_max_deg_per_s", deg(m.rate_max)},
              {"alpha_cap", m.alpha_cap},
              {"sqp_max_iter", m.sqp_max_iter},
              {"sqp_tol_rad", m.sqp_tol},
              {"slack_lin", m.slack_lin},
              {"slack_quad", m.slack_quad},
              {"max_step_halvings", m.max_step_halvings}};
  j["initial"] = {{"x_m", s.initial_pose.x},
                  {"y_m", s.initial_pose.y},
                  {"heading_deg", deg(s.initial_pose.theta)},
                  {"steering_deg", deg(s.initial_steering)}};
  j["duration_s"] = s.duration;
  return j;
}

namespace {

Scenario parse_scenario(const json& j)
{
  if (!j.is_object()) {
    throw std::invalid_argument("scenario: top level must be an object");
  }
  const int version = require<int>(j, "schema_version", "scenario");
  if (version != kScenarioSchemaVersion) {
    throw std::invalid_argument("scenario: unsupported schema_version " + std::to_string(version));
  }

  Scenario s;
  s.name = require<std::string>(j, "name", "scenario");
  s.description = optional<std::string>(j, "description", "");

  const json& v = j.at("vehicle");
  s.vehicle.l_f = require<double>(v, "l_f_m", "vehicle");
  s.vehicle.l_r = require<double>(v, "l_r_m", "vehicle");
  s.vehicle.l_f_prime = require<double>(v, "l_f_prime_m", "vehicle");
  s.vehicle.w = require<double>(v, "width_m", "vehicle");

  const json field = j.value("field", json::object());
  s.ellipse_order = optional<int>(field, "ellipse_order", 4);
  s.alpha = optional<double>(field, "alpha", 1.0);
  s.slope_exp = optional<double>(field, "slope_exp", 1.0);
  s.eps_floor = optional<double>(field, "eps_floor", 1e-9);

  for (const auto& o : j.value("obstacles", json::array())) {
    RectObstacle r;
    r.x_e = require<double>(o, "x_m", "obstacle");
    r.y_e = require<double>(o, "y_m", "obstacle");
    r.phi = rad(optional<double>(o, "heading_deg", 0.0));
    r.length = require<double>(o, "length_m", "obstacle");
    r.width = require<double>(o, "width_m", "obstacle");
    s.obstacles.push_back(r);
  }

  if (!j.contains("path") || !j.at("path").contains("waypoints_m")) {
    throw std::invalid_argument("scenario: missing path.waypoints_m");
  }
  for (const auto& p : j.at("path").at("waypoints_m")) {
    if (!p.is_array() || p.size() != 2) {
      throw std::invalid_argument("scenario: waypoints must be [x, y] pairs");
    }
    s.path.emplace_back(p[0].get<double>(), p[1].get<double>());
  }

  s.speed = require<double>(j, "speed_mps", "scenario");
  const json& t = j.at("teleop");
  s.gains.gamma1 = require<double>(t, "gamma1", "teleop");
  s.gains.gamma2 = require<double>(t, "gamma2", "teleop");
  s.gains.gamma3 = require<double>(t, "gamma3", "teleop");

  const json m = j.value("mpc", json::object());
  MpcConfig d;
  s.mpc.horizon = optional<int>(m, "horizon", d.horizon);
  s.mpc.t_d = optional<double>(m, "t_d_s", d.t_d);
  s.mpc.t_s = optional<double>(m, "t_s_s", d.t_s);
  s.mpc.w_dref = optional<double>(m, "w_dref", d.w_dref);
  s.mpc.w_P = optional<double>(m, "w_P", d.w_P);
  s.mpc.w_drate = optional<double>(m, "w_drate", d.w_drate);
  s.mpc.delta_min = rad(optional<double>(m, "delta_min_deg", -35.0));
  s.mpc.delta_max = rad(optional<double>(m, "delta_max_deg", 35.0));
  s.mpc.rate_min = rad(optional<double>(m, "rate_min_deg_per_s", -30.0));
  s.mpc.rate_max = rad(optional<double>(m, "rate_max_deg_per_s", 30.0));
  s.mpc.alpha_cap = optional<double>(m, "alpha_cap", s.alpha);
  s.mpc.sqp_max_iter = optional<int>(m, "sqp_max_iter", d.sqp_max_iter);
  s.mpc.sqp_tol = optional<double>(m, "sqp_tol_rad", d.sqp_tol);
  s.mpc.slack_lin = optional<double>(m, "slack_lin", d.slack_lin);
  s.mpc.slack_quad = optional<double>(m, "slack_quad", d.slack_quad);
  s.mpc.max_step_halvings = optional<int>(m, "max_step_halvings", d.max_step_halvings);

  const json init = j.value("initial", json::object());
  s.initial_pose.x = optional<double>(init, "x_m", 0.0);
  s.initial_pose.y = optional<double>(init, "y_m", 0.0);
  s.initial_pose.theta = rad(optional<double>(init, "heading_deg", 0.0));
  s.initial_steering = rad(optional<double>(init, "steering_deg", 0.0));

  s.duration = require<double>(j, "duration_s", "scenario");
  s.validate();
  return s;
}

}  // namespace

Scenario scenario_from_json(const json& j)
{
  try {
    return parse_scenario(j);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scenario: malformed document: ") + e.what());
  }
}

Scenario load_scenario(const std::filesystem::path& file)
{
  std::ifstream in(file);
  if (!in) {
    throw std::invalid_argument("scenario: cannot open " + file.string());
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("scenario: " + file.string() + ": " + e.what());
  }
  return scenario_from_json(j);
}

std::filesystem::path bundled_scenario_dir()
{
  return SEMISTEER_SCENARIO_DIR;
}

Scenario load_bundled_scenario(const std::string& name)
{
  const bool plain = !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
  if (!plain) {
    throw std::invalid_argument("scenario: '" + name + "' is not a bundled scenario name");
  }
  const std::filesystem::path file = bundled_scenario_dir() / (name + ".json");
  if (!std::filesystem::exists(file)) {
    throw std::invalid_argument("scenario: no bundled scenario named '" + name + "'");
  }
  return load_scenario(file);
}

Scenario load_scenario_by_name(const std::string& name_or_path)
{
  std::filesystem::path p(name_or_path);
  if (std::filesystem::exists(p)) {
    return load_scenario(p);
  }
  const std::filesystem::path bundled = bundled_scenario_dir() / (name_or_path + ".json");
  if (std::filesystem::exists(bundled)) {
    return load_scenario(bundled);
  }
  throw std::invalid_argument("scenario: no file or bundled scenario named '" + name_or_path + "'");
}

std::string scenario_hash(const Scenario& s)
{
  const std::string text = scenario_to_json(s).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace semisteer
