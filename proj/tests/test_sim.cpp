#include "semisteer/scenario.hpp"
#include "semisteer/sim.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace semisteer;

namespace {

Scenario open_road()
{
  Scenario s = load_bundled_scenario("parking_lot");
  s.name = "open_road";
  s.obstacles.clear();
  s.path = {{-10.0, 0.0}, {100.0, 0.0}};
  s.initial_pose = {};
  s.initial_steering = 0.0;
  s.duration = 5.0;
  return s;
}

void check_same_record(const TickRecord& a, const TickRecord& b)
{
  CHECK(a.tick == b.tick);
  CHECK(a.time == b.time);
  CHECK(a.pose.x == b.pose.x);
  CHECK(a.pose.y == b.pose.y);
  CHECK(a.pose.theta == b.pose.theta);
  CHECK(a.edges.x_fl == b.edges.x_fl);
  CHECK(a.edges.y_fr == b.edges.y_fr);
  CHECK(a.speed == b.speed);
  CHECK(a.lateral_error == b.lateral_error);
  CHECK(a.heading_error == b.heading_error);
  CHECK(a.delta_fbl == b.delta_fbl);
  CHECK(a.delta_ref == b.delta_ref);
  CHECK(a.delta_applied == b.delta_applied);
  CHECK(a.p_fl == b.p_fl);
  CHECK(a.p_fr == b.p_fr);
  CHECK(a.cost.reference == b.cost.reference);
  CHECK(a.cost.potential == b.cost.potential);
  CHECK(a.cost.smoothness == b.cost.smoothness);
  CHECK(a.sqp_iters == b.sqp_iters);
  CHECK(a.slack_used == b.slack_used);
  CHECK(a.fault == b.fault);
  CHECK(a.overrun == b.overrun);
  CHECK(a.max_predicted_potential == b.max_predicted_potential);
}

std::filesystem::path scratch_dir(const std::string& name)
{
  const auto dir = std::filesystem::temp_directory_path() / ("semisteer_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("bundled scenarios load and validate")
{
  for (const char* name : {"parking_lot", "lane_change"}) {
    const Scenario s = load_bundled_scenario(name);
    CHECK(s.name == name);
    CHECK_NOTHROW(s.validate());
    CHECK(s.num_ticks() == static_cast<int>(std::lround(s.duration / s.mpc.t_s)));
    const Scenario back = scenario_from_json(scenario_to_json(s));
    CHECK(scenario_hash(back) == scenario_hash(s));
    CHECK(scenario_hash(s).size() == 16);
  }
  CHECK(scenario_hash(load_bundled_scenario("parking_lot")) !=
        scenario_hash(load_bundled_scenario("lane_change")));
}

TEST_CASE("bundled names cannot reach the file system")
{
  CHECK_THROWS_AS(load_bundled_scenario("../CMakeLists"), std::invalid_argument);
  CHECK_THROWS_AS(load_bundled_scenario("/etc/passwd"), std::invalid_argument);
  CHECK_THROWS_AS(load_bundled_scenario("parking_lot.json"), std::invalid_argument);
  CHECK_THROWS_AS(load_bundled_scenario(""), std::invalid_argument);
  CHECK_THROWS_AS(load_bundled_scenario("no_such_scenario"), std::invalid_argument);
}

TEST_CASE("scenario documents are checked")
{
  const nlohmann::json good = scenario_to_json(load_bundled_scenario("parking_lot"));
  CHECK_NOTHROW(scenario_from_json(good));

  nlohmann::json j = good;
  j["schema_version"] = 2;
  CHECK_THROWS_AS(scenario_from_json(j), std::invalid_argument);

  j = good;
  j.erase("speed_mps");
  CHECK_THROWS_AS(scenario_from_json(j), std::invalid_argument);

  j = good;
  j["speed_mps"] = "fast";
  CHECK_THROWS_AS(scenario_from_json(j), std::invalid_argument);

  j = good;
  j["speed_mps"] = -1.0;
  CHECK_THROWS_AS(scenario_from_json(j), std::invalid_argument);

  j = good;
  j["field"]["ellipse_order"] = 3;
  CHECK_THROWS_AS(scenario_from_json(j), std::invalid_argument);

  j = good;
  j["path"]["waypoints_m"] = nlohmann::json::array({{0.0, 0.0}});
  CHECK_THROWS_AS(scenario_from_json(j), std::invalid_argument);

  j = good;
  j["initial"]["steering_deg"] = 80.0;
  CHECK_THROWS_AS(scenario_from_json(j), std::invalid_argument);

  j = good;
  j["duration_s"] = 0.0;
  CHECK_THROWS_AS(scenario_from_json(j), std::invalid_argument);

  CHECK_THROWS_AS(scenario_from_json(nlohmann::json::array()), std::invalid_argument);
}

TEST_CASE("open road: no steering, straight line")
{
  const Scenario s = open_road();
  for (bool assisted : {false, true}) {
    const SimTrace t = run_scenario(s, assisted);
    REQUIRE(t.records.size() == 100);
    for (const auto& r : t.records) {
      CHECK(r.delta_applied == 0.0);
      CHECK(r.pose.y == 0.0);
      CHECK(r.p_fl == 0.0);
      CHECK_FALSE(r.slack_used);
    }
    const TickRecord& last = t.records.back();
    CHECK(last.pose.x == doctest::Approx(s.speed * (s.duration - s.mpc.t_s)).epsilon(1e-12));
    CHECK(final_lane_offset(t) < 1e-12);
  }
  ClosedLoop loop(s, true);
  for (int k = 0; k < s.num_ticks(); ++k) loop.step();
  CHECK(loop.pose().x == doctest::Approx(s.speed * s.duration).epsilon(1e-12));
  CHECK(loop.pose().y == 0.0);
}

TEST_CASE("runs are reproducible")
{
  const Scenario s = load_bundled_scenario("parking_lot");
  const SimTrace a = run_scenario(s, true);
  const SimTrace b = run_scenario(s, true);
  std::ostringstream wa;
  std::ostringstream wb;
  write_trace(wa, a, false);
  write_trace(wb, b, false);
  CHECK(wa.str() == wb.str());
  CHECK(wa.str().find("solve_time") == std::string::npos);
}

TEST_CASE("trace round trip is exact")
{
  const SimTrace t = run_scenario(load_bundled_scenario("lane_change"), true);
  std::stringstream ss;
  write_trace(ss, t, true);
  const SimTrace back = read_trace(ss);
  CHECK(back.meta.scenario == t.meta.scenario);
  CHECK(back.meta.scenario_hash == t.meta.scenario_hash);
  CHECK(back.meta.assisted);
  CHECK(back.meta.obstacles.size() == t.meta.obstacles.size());
  CHECK(back.meta.path == t.meta.path);
  REQUIRE(back.records.size() == t.records.size());
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    check_same_record(t.records[i], back.records[i]);
    CHECK(t.records[i].solve_time == back.records[i].solve_time);
  }
  CHECK(back.max_potential() == t.max_potential());
}

TEST_CASE("malformed traces are rejected")
{
  std::stringstream empty("");
  CHECK_THROWS_AS(read_trace(empty), std::runtime_error);
  std::stringstream tick_first("{\"type\":\"tick\"}\n");
  CHECK_THROWS_AS(read_trace(tick_first), std::runtime_error);
  std::stringstream garbage("not json\n");
  CHECK_THROWS_AS(read_trace(garbage), std::runtime_error);
}

TEST_CASE("applied steering respects the limits")
{
  for (const char* name : {"parking_lot", "lane_change"}) {
    const Scenario s = load_bundled_scenario(name);
    for (bool assisted : {false, true}) {
      const SimTrace t = run_scenario(s, assisted);
      double prev = s.initial_steering;
      for (const auto& r : t.records) {
        CHECK(r.delta_applied >= s.mpc.delta_min);
        CHECK(r.delta_applied <= s.mpc.delta_max);
        CHECK((r.delta_applied - prev) / s.mpc.t_s <= s.mpc.rate_max + 1e-9);
        CHECK((r.delta_applied - prev) / s.mpc.t_s >= s.mpc.rate_min - 1e-9);
        prev = r.delta_applied;
      }
    }
  }
}

TEST_CASE("clip steering")
{
  const MpcConfig c;
  CHECK(clip_steering(0.2, 0.0, c) == doctest::Approx(c.rate_max * c.t_s));
  CHECK(clip_steering(-0.2, 0.0, c) == doctest::Approx(c.rate_min * c.t_s));
  CHECK(clip_steering(0.01, 0.0, c) == 0.01);
  CHECK(clip_steering(1.0, c.delta_max, c) == c.delta_max);
}

TEST_CASE("assisted runs stay out of the soft constraint")
{
  for (const char* name : {"parking_lot", "lane_change"}) {
    const SimTrace t = run_scenario(load_bundled_scenario(name), true);
    std::size_t slack = 0;
    for (const auto& r : t.records) {
      slack += r.slack_used ? 1 : 0;
      CHECK(r.sqp_iters <= 3);
      CHECK_FALSE(r.fault);
    }
    CAPTURE(name);
    CHECK(static_cast<double>(slack) <= 0.05 * static_cast<double>(t.records.size()));
    CHECK_FALSE(t.meta.faulted);
  }
}

TEST_CASE("a missed deadline holds the previous steering")
{
  Scenario s = load_bundled_scenario("parking_lot");
  ClosedLoop loop(s, true);
  for (int k = 0; k < 20; ++k) loop.step();
  const double held = loop.last_applied();
  const auto before = loop.last_solution()->delta_seq;
  const TickRecord r = loop.step(std::nullopt, -1.0);
  CHECK(r.overrun);
  CHECK(r.delta_applied == held);
  CHECK(loop.last_solution()->delta_seq == before);
  CHECK(loop.tick() == 21);
  CHECK_FALSE(loop.step().overrun);
}

TEST_CASE("external reference bypasses the operator model")
{
  const Scenario s = open_road();
  ClosedLoop loop(s, false);
  TickRecord r = loop.step(0.2);
  CHECK(r.delta_ref == 0.2);
  CHECK(r.delta_fbl == 0.2);
  CHECK(r.delta_applied == doctest::Approx(s.mpc.rate_max * s.mpc.t_s));
  r = loop.step(5.0);
  CHECK(r.delta_ref == s.mpc.delta_max);
  CHECK_THROWS_AS(loop.step(std::nan("")), std::invalid_argument);
  loop.reset();
  CHECK(loop.tick() == 0);
  CHECK(loop.pose().x == s.initial_pose.x);
  CHECK(loop.last_applied() == s.initial_steering);
}

TEST_CASE("speed changes")
{
  ClosedLoop loop(open_road(), false);
  loop.set_speed(0.0);
  const TickRecord r = loop.step();
  CHECK(r.speed == 0.0);
  CHECK(loop.pose().x == 0.0);
  CHECK_THROWS_AS(loop.set_speed(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(loop.set_speed(std::nan("")), std::invalid_argument);
}

TEST_CASE("plot export")
{
  const SimTrace t = run_scenario(load_bundled_scenario("parking_lot"), true);
  for (const char* kind : {"trajectory", "steering", "potential", "ellipses"}) {
    const PlotKind k = parse_plot_kind(kind);
    CHECK(to_string(k) == kind);
    const auto dir = scratch_dir(kind);
    const auto files = export_plot_data(t, k, dir);
    REQUIRE_FALSE(files.empty());
    CHECK(files.back().filename() == "manifest.json");
    for (const auto& f : files) CHECK(std::filesystem::file_size(f) > 0);
    std::ifstream mf(files.back());
    const nlohmann::json m = nlohmann::json::parse(mf);
    CHECK(m.at("kind") == kind);
    CHECK(m.at("records") == t.records.size());
    CHECK(m.at("files").size() == files.size() - 1);
    std::filesystem::remove_all(dir);
  }
  CHECK_THROWS_AS(parse_plot_kind("histogram"), std::invalid_argument);

  SimTrace empty;
  const auto dir = scratch_dir("empty");
  CHECK_NOTHROW(export_plot_data(empty, PlotKind::potential, dir));
  CHECK_NOTHROW(export_plot_data(empty, PlotKind::trajectory, dir));
  std::filesystem::remove_all(dir);
}

TEST_CASE("polylines are closed")
{
  std::ostringstream os;
  write_polylines(os, {{{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}}, {{5.0, 5.0}, {6.0, 5.0}}});
  CHECK(os.str() == "0 0\n1 0\n1 1\n0 0\n\n5 5\n6 5\n5 5\n");
}

TEST_CASE("benchmark needs enough ticks")
{
  CHECK_THROWS_AS(benchmark(load_bundled_scenario("parking_lot"), 10), std::invalid_argument);
  const TimingSummary t = benchmark(load_bundled_scenario("parking_lot"), 100);
  CHECK(t.ticks == 100);
  CHECK(t.median > 0.0);
  CHECK(t.median <= t.p95);
  CHECK(t.p95 <= t.max);
}
