// Command line front end: headless runs, benchmarks, plot data and the live service.

#include "semisteer/qp.hpp"
#include "semisteer/scenario.hpp"
#include "semisteer/sim.hpp"

#include "semisteer/bridge/server.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace semisteer;

namespace {

int cmd_run(const std::string& scenario_arg, bool unassisted, const std::string& trace_path,
            bool no_timing)
{
  const Scenario scenario = load_scenario_by_name(scenario_arg);
  const bool assisted = !unassisted;
  const SimTrace trace = run_scenario(scenario, assisted);

  if (!trace_path.empty()) {
    std::ofstream out(trace_path);
    if (!out) {
      std::cerr << "cannot write " << trace_path << '\n';
      return 1;
    }
    write_trace(out, trace, !no_timing);
  }

  int slack_ticks = 0;
  int max_iters = 0;
  std::vector<double> times;
  for (const auto& r : trace.records) {
    slack_ticks += r.slack_used ? 1 : 0;
    max_iters = std::max(max_iters, r.sqp_iters);
    times.push_back(r.solve_time);
  }
  const double worst = trace.max_potential();
  const double limit = 1.01 * scenario.mpc.alpha_cap;
  std::printf("scenario        %s (%s)\n", scenario.name.c_str(), assisted ? "assisted" : "unassisted");
  std::printf("ticks           %zu\n", trace.records.size());
  std::printf("max potential   %.6f (alpha %.3f)\n", worst, scenario.alpha);
  std::printf("final offset    %.4f m from the last path segment\n", final_lane_offset(trace));
  if (assisted) {
    std::sort(times.begin(), times.end());
    const double median = times.empty() ? 0.0 : times[times.size() / 2];
    std::printf("slack ticks     %d\n", slack_ticks);
    std::printf("max sqp iters   %d\n", max_iters);
    std::printf("median solve    %.3f ms\n", 1e3 * median);
  }
  if (trace.meta.faulted) {
    std::printf("FAULT           controller fault at tick %d, vehicle stopped\n",
                trace.meta.fault_tick);
  }
  if (assisted && (worst > limit || trace.meta.faulted)) {
    std::printf("VIOLATION       assisted run exceeded the potential bound\n");
    return 2;
  }
  return 0;
}

int cmd_bench(const std::string& scenario_arg, int ticks)
{
  const Scenario scenario = load_scenario_by_name(scenario_arg);
  const TimingSummary t = benchmark(scenario, ticks);
  std::printf("{\"scenario\": \"%s\", \"ticks\": %d, \"median_ms\": %.4f, \"p95_ms\": %.4f, "
              "\"max_ms\": %.4f, \"mean_ms\": %.4f}\n",
              scenario.name.c_str(), t.ticks, 1e3 * t.median, 1e3 * t.p95, 1e3 * t.max,
              1e3 * t.mean);
  return 0;
}

int cmd_plot(const std::string& trace_path, const std::string& kind, const std::string& out_dir)
{
  std::ifstream in(trace_path);
  if (!in) {
    std::cerr << "cannot read " << trace_path << '\n';
    return 1;
  }
  const SimTrace trace = read_trace(in);
  for (const auto& f : export_plot_data(trace, parse_plot_kind(kind), out_dir)) {
    std::cout << f.string() << '\n';
  }
  return 0;
}

std::vector<double> parse_list(const std::string& text)
{
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(std::stod(item));
  }
  return out;
}

int cmd_contours(const std::string& orders, const std::string& rect, const std::string& levels,
                 int samples)
{
  const auto dims = parse_list(rect);
  if (dims.size() != 2) {
    throw std::invalid_argument("--rect expects L,W");
  }
  RectObstacle r;
  r.length = dims[0];
  r.width = dims[1];
  std::vector<Polyline> all{r.corners()};
  for (double n : parse_list(orders)) {
    auto polys = emit_contours(bound_rectangle(r, static_cast<int>(n)), parse_list(levels), samples);
    all.insert(all.end(), polys.begin(), polys.end());
  }
  std::cout.precision(12);
  write_polylines(std::cout, all);
  return 0;
}

int cmd_qp_dump(const std::string& scenario_arg, int tick, const std::string& out_path)
{
  const Scenario scenario = load_scenario_by_name(scenario_arg);
  ClosedLoop loop(scenario, true);
  for (int k = 0; k < tick; ++k) {
    loop.step();
  }
  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!out_path.empty()) {
    file.open(out_path);
    out = &file;
  }
  bool dumped = false;
  loop.controller().set_qp_hook([&](const QuadProgram& qp, int it) {
    if (!dumped && it == 0) {
      write_qp(*out, qp);
      dumped = true;
    }
  });
  loop.step();
  return 0;
}

int cmd_qp_solve(const std::string& path)
{
  std::ifstream in(path);
  if (!in) {
    std::cerr << "cannot read " << path << '\n';
    return 1;
  }
  const QuadProgram qp = read_qp(in);
  const QpSolution sol = solve_qp(qp);
  std::printf("status %s iterations %d kkt %.3e objective %.12g\n", to_string(sol.status).c_str(),
              sol.iterations, sol.kkt_residual, sol.objective);
  for (Eigen::Index i = 0; i < sol.z.size(); ++i) {
    std::printf("z[%ld] = %.12g\n", static_cast<long>(i), sol.z(i));
  }
  return sol.status == QpStatus::optimal ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Predictive steering assistance for teleoperated driving"};
  app.require_subcommand(1);

  std::string scenario_arg;
  bool assisted_flag = false;
  bool unassisted_flag = false;
  std::string trace_path;
  bool no_timing = false;
  auto* run = app.add_subcommand("run", "run a scenario headless");
  run->add_option("scenario", scenario_arg, "scenario file or bundled name")->required();
  auto* a_opt = run->add_flag("--assisted", assisted_flag, "controller corrects the operator (default)");
  run->add_flag("--unassisted", unassisted_flag, "operator steers alone")->excludes(a_opt);
  run->add_option("--trace", trace_path, "write the trace (JSON lines) to this file");
  run->add_flag("--no-timing", no_timing, "omit wall-clock fields from the trace");

  int ticks = 400;
  auto* bench = app.add_subcommand("bench", "time the controller solve");
  bench->add_option("scenario", scenario_arg, "scenario file or bundled name")->required();
  bench->add_option("--ticks", ticks, "number of control periods")->check(CLI::Range(100, 1000000));

  std::string kind;
  std::string out_dir = "plots";
  auto* plot = app.add_subcommand("plot", "export plot data from a trace");
  plot->add_option("trace", trace_path, "trace file")->required();
  plot->add_option("--kind", kind, "trajectory | steering | potential | ellipses")->required();
  plot->add_option("--out", out_dir, "output directory");

  std::string orders = "2,4,6,8";
  std::string rect = "4.8,1.8";
  std::string levels = "0";
  int samples = 256;
  auto* contours = app.add_subcommand("contours", "superellipse bounds of a rectangle");
  contours->add_option("--n", orders, "comma-separated even orders");
  contours->add_option("--rect", rect, "rectangle L,W in meters");
  contours->add_option("--levels", levels, "comma-separated shape levels (> -1)");
  contours->add_option("--samples", samples, "points per contour (>= 16)");

  int dump_tick = 0;
  std::string dump_out;
  auto* qp_dump = app.add_subcommand("qp-dump", "dump the first QP of an assisted tick");
  qp_dump->add_option("scenario", scenario_arg, "scenario file or bundled name")->required();
  qp_dump->add_option("--tick", dump_tick, "tick to dump")->check(CLI::NonNegativeNumber);
  qp_dump->add_option("--out", dump_out, "output file (default stdout)");

  std::string qp_file;
  auto* qp_solve = app.add_subcommand("qp-solve", "solve a dumped QP");
  qp_solve->add_option("file", qp_file, "QP dump")->required();

  std::string host = "127.0.0.1";
  unsigned short port = 8765;
  std::string static_dir;
  auto* serve = app.add_subcommand("serve", "live session service (WebSocket)");
  serve->add_option("--host", host, "listen address");
  serve->add_option("--port", port, "listen port");
  serve->add_option("--static", static_dir, "directory served for plain HTTP GET requests");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(scenario_arg, unassisted_flag, trace_path, no_timing);
    if (*bench) return cmd_bench(scenario_arg, ticks);
    if (*plot) return cmd_plot(trace_path, kind, out_dir);
    if (*contours) return cmd_contours(orders, rect, levels, samples);
    if (*qp_dump) return cmd_qp_dump(scenario_arg, dump_tick, dump_out);
    if (*qp_solve) return cmd_qp_solve(qp_file);
    if (*serve) {
      bridge::ServerOptions opts;
      opts.host = host;
      opts.port = port;
      opts.static_dir = static_dir;
      bridge::run_server(opts);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
