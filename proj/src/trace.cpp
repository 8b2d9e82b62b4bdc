#include "semisteer/sim.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

namespace semisteer {

using nlohmann::json;

namespace {

constexpr int kTraceVersion = 1;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

json obstacle_json(const RectObstacle& o)
{
  return {{"x_m", o.x_e}, {"y_m", o.y_e}, {"heading_rad", o.phi}, {"length_m", o.length},
          {"width_m", o.width}};
}

RectObstacle obstacle_from(const json& j)
{
  RectObstacle o;
  o.x_e = j.at("x_m").get<double>();
  o.y_e = j.at("y_m").get<double>();
  o.phi = j.at("heading_rad").get<double>();
  o.length = j.at("length_m").get<double>();
  o.width = j.at("width_m").get<double>();
  return o;
}

}  // namespace

json tick_to_json(const TickRecord& r, bool include_timing)
{
  json j = {{"type", "tick"},
            {"tick", r.tick},
            {"t", r.time},
            {"x", r.pose.x},
            {"y", r.pose.y},
            {"theta", r.pose.theta},
            {"x_fl", r.edges.x_fl},
            {"y_fl", r.edges.y_fl},
            {"x_fr", r.edges.x_fr},
            {"y_fr", r.edges.y_fr},
            {"v", r.speed},
            {"e_lat", r.lateral_error},
            {"e_head", r.heading_error},
            {"delta_fbl", r.delta_fbl},
            {"delta_ref", r.delta_ref},
            {"delta_applied", r.delta_applied},
            {"p_fl", r.p_fl},
            {"p_fr", r.p_fr},
            {"j_ref", r.cost.reference},
            {"j_pot", r.cost.potential},
            {"j_rate", r.cost.smoothness},
            {"sqp_iters", r.sqp_iters},
            {"slack_used", r.slack_used},
            {"fault", r.fault},
            {"p_pred_max", r.max_predicted_potential},
            {"overrun", r.overrun}};
  if (include_timing) {
    j["solve_time_s"] = r.solve_time;
  }
  return j;
}

TickRecord tick_from_json(const json& j)
{
  TickRecord r;
  r.tick = j.at("tick").get<int>();
  r.time = j.at("t").get<double>();
  r.pose = {j.at("x").get<double>(), j.at("y").get<double>(), j.at("theta").get<double>()};
  r.edges = {j.at("x_fl").get<double>(), j.at("y_fl").get<double>(), j.at("x_fr").get<double>(),
             j.at("y_fr").get<double>()};
  r.speed = j.at("v").get<double>();
  r.lateral_error = j.at("e_lat").get<double>();
  r.heading_error = j.at("e_head").get<double>();
  r.delta_fbl = j.at("delta_fbl").get<double>();
  r.delta_ref = j.at("delta_ref").get<double>();
  r.delta_applied = j.at("delta_applied").get<double>();
  r.p_fl = j.at("p_fl").get<double>();
  r.p_fr = j.at("p_fr").get<double>();
  r.cost = {j.at("j_ref").get<double>(), j.at("j_pot").get<double>(), j.at("j_rate").get<double>()};
  r.sqp_iters = j.at("sqp_iters").get<int>();
  r.slack_used = j.at("slack_used").get<bool>();
  r.fault = j.at("fault").get<bool>();
  r.max_predicted_potential = j.at("p_pred_max").get<double>();
  r.overrun = j.value("overrun", false);
  r.solve_time = j.value("solve_time_s", 0.0);
  return r;
}

namespace {

std::ofstream open_out(const std::filesystem::path& p)
{
  std::ofstream out(p);
  if (!out) {
    throw std::runtime_error("cannot write " + p.string());
  }
  out << std::setprecision(12);
  return out;
}

}  // namespace

void write_trace(std::ostream& os, const SimTrace& trace, bool include_timing)
{
  json header = {{"type", "header"},
                 {"format", "semisteer-trace"},
                 {"version", kTraceVersion},
                 {"scenario", trace.meta.scenario},
                 {"scenario_hash", trace.meta.scenario_hash},
                 {"assisted", trace.meta.assisted},
                 {"seed", trace.meta.seed},
                 {"alpha", trace.meta.alpha},
                 {"t_s", trace.meta.t_s},
                 {"ellipse_order", trace.meta.ellipse_order},
                 {"faulted", trace.meta.faulted},
                 {"fault_tick", trace.meta.fault_tick},
                 {"timing", include_timing}};
  json obstacles = json::array();
  for (const auto& o : trace.meta.obstacles) obstacles.push_back(obstacle_json(o));
  header["obstacles"] = obstacles;
  json path = json::array();
  for (const auto& p : trace.meta.path) path.push_back({p.x(), p.y()});
  header["path"] = path;
  os << header.dump() << '\n';
  for (const auto& r : trace.records) {
    os << tick_to_json(r, include_timing).dump() << '\n';
  }
}

SimTrace read_trace(std::istream& is)
{
  SimTrace trace;
  std::string line;
  bool have_header = false;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    try {
      const json j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        if (j.at("format").get<std::string>() != "semisteer-trace" ||
            j.at("version").get<int>() != kTraceVersion) {
          throw std::runtime_error("unsupported trace format");
        }
        TraceMeta& m = trace.meta;
        m.scenario = j.at("scenario").get<std::string>();
        m.scenario_hash = j.at("scenario_hash").get<std::string>();
        m.assisted = j.at("assisted").get<bool>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.alpha = j.at("alpha").get<double>();
        m.t_s = j.at("t_s").get<double>();
        m.ellipse_order = j.at("ellipse_order").get<int>();
        m.faulted = j.at("faulted").get<bool>();
        m.fault_tick = j.at("fault_tick").get<int>();
        for (const auto& o : j.at("obstacles")) m.obstacles.push_back(obstacle_from(o));
        for (const auto& p : j.at("path")) m.path.emplace_back(p[0].get<double>(), p[1].get<double>());
        have_header = true;
      } else if (type == "tick") {
        if (!have_header) {
          throw std::runtime_error("tick record before header");
        }
        trace.records.push_back(tick_from_json(j));
      } else {
        throw std::runtime_error("unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw std::runtime_error("trace line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) {
    throw std::runtime_error("trace has no header");
  }
  return trace;
}

PlotKind parse_plot_kind(const std::string& kind)
{
  if (kind == "trajectory") return PlotKind::trajectory;
  if (kind == "steering") return PlotKind::steering;
  if (kind == "potential") return PlotKind::potential;
  if (kind == "ellipses") return PlotKind::ellipses;
  throw std::invalid_argument("unknown plot kind '" + kind +
                              "' (expected trajectory, steering, potential or ellipses)");
}

std::string to_string(PlotKind kind)
{
  switch (kind) {
    case PlotKind::trajectory: return "trajectory";
    case PlotKind::steering: return "steering";
    case PlotKind::potential: return "potential";
    case PlotKind::ellipses: return "ellipses";
  }
  return "unknown";
}

void write_polylines(std::ostream& os, const std::vector<Polyline>& polylines)
{
  bool first = true;
  for (const auto& poly : polylines) {
    if (!first) {
      os << '\n';
    }
    first = false;
    for (const auto& p : poly) {
      os << p.x() << ' ' << p.y() << '\n';
    }
    if (!poly.empty()) {
      os << poly.front().x() << ' ' << poly.front().y() << '\n';
    }
  }
}

std::vector<std::filesystem::path> export_plot_data(const SimTrace& trace, PlotKind kind,
                                                    const std::filesystem::path& out_dir)
{
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  json files = json::array();
  const std::string stem = trace.meta.scenario.empty() ? "trace" : trace.meta.scenario;
  const std::string run = trace.meta.assisted ? "assisted" : "unassisted";

  const auto add = [&](const std::string& name, const std::vector<std::string>& columns,
                       const std::string& description) {
    written.push_back(out_dir / name);
    files.push_back({{"file", name}, {"columns", columns}, {"description", description}});
    return open_out(out_dir / name);
  };

  switch (kind) {
    case PlotKind::trajectory: {
      auto out = add(stem + "_" + run + "_trajectory.dat",
                     {"t", "x", "y", "theta", "x_fl", "y_fl", "x_fr", "y_fr"},
                     "CoM pose and front corner traces");
      out << "# t x y theta x_fl y_fl x_fr y_fr\n";
      for (const auto& r : trace.records) {
        out << r.time << ' ' << r.pose.x << ' ' << r.pose.y << ' ' << r.pose.theta << ' '
            << r.edges.x_fl << ' ' << r.edges.y_fl << ' ' << r.edges.x_fr << ' ' << r.edges.y_fr
            << '\n';
      }
      auto obs = add(stem + "_obstacles.dat", {"x", "y"},
                     "obstacle rectangles followed by their s=0 bounds, blank-line separated");
      obs << "# x y\n";
      std::vector<Polyline> polys;
      for (const auto& o : trace.meta.obstacles) {
        polys.push_back(o.corners());
      }
      for (const auto& o : trace.meta.obstacles) {
        auto c = emit_contours(bound_rectangle(o, trace.meta.ellipse_order), {0.0}, 256);
        polys.push_back(std::move(c.front()));
      }
      write_polylines(obs, polys);
      break;
    }
    case PlotKind::steering: {
      auto out = add(stem + "_" + run + "_steering.dat",
                     {"t", "delta_fbl_deg", "delta_ref_deg", "delta_applied_deg"},
                     "teleoperator and applied steering");
      out << "# t delta_fbl_deg delta_ref_deg delta_applied_deg\n";
      for (const auto& r : trace.records) {
        out << r.time << ' ' << r.delta_fbl * kRadToDeg << ' ' << r.delta_ref * kRadToDeg << ' '
            << r.delta_applied * kRadToDeg << '\n';
      }
      break;
    }
    case PlotKind::potential: {
      auto out = add(stem + "_" + run + "_potential.dat", {"t", "p_fr", "p_fl"},
                     "potential at the front corners; trailing block is the alpha marker");
      out << "# t p_fr p_fl\n";
      out << "# alpha " << trace.meta.alpha << '\n';
      for (const auto& r : trace.records) {
        out << r.time << ' ' << r.p_fr << ' ' << r.p_fl << '\n';
      }
      if (!trace.records.empty()) {
        out << '\n';
        out << trace.records.front().time << ' ' << trace.meta.alpha << ' ' << trace.meta.alpha << '\n';
        out << trace.records.back().time << ' ' << trace.meta.alpha << ' ' << trace.meta.alpha << '\n';
      }
      break;
    }
    case PlotKind::ellipses: {
      RectObstacle rect;
      rect.length = 4.8;
      rect.width = 1.8;
      if (!trace.meta.obstacles.empty()) {
        rect = trace.meta.obstacles.front();
      }
      auto out = add(stem + "_ellipses.dat", {"x", "y"},
                     "rectangle, then s=0 contours for n = 2, 4, 6, 8");
      out << "# x y\n";
      std::vector<Polyline> polys{rect.corners()};
      for (int n : {2, 4, 6, 8}) {
        auto c = emit_contours(bound_rectangle(rect, n), {0.0}, 512);
        polys.push_back(std::move(c.front()));
      }
      write_polylines(out, polys);
      break;
    }
  }

  const json manifest = {{"kind", to_string(kind)},
                         {"scenario", trace.meta.scenario},
                         {"scenario_hash", trace.meta.scenario_hash},
                         {"assisted", trace.meta.assisted},
                         {"alpha", trace.meta.alpha},
                         {"records", trace.records.size()},
                         {"files", files}};
  const auto manifest_path = out_dir / "manifest.json";
  std::ofstream mf(manifest_path);
  mf << manifest.dump(2) << '\n';
  written.push_back(manifest_path);
  return written;
}

}  // namespace semisteer
