// vizbridge: MCP server and headless drivers for the visualization engine.
//
// Subcommands:
//   serve   - run the MCP server over stdin/stdout (stdout carries protocol
//             traffic only; diagnostics go to --log or stderr)
//   replay  - replay a recorded tool-call trace and report per-step results
//   demo    - run a goal controller end-to-end and print its trace as JSON
//
// Exit codes: 0 success, 1 assertion/convergence failure, 2 usage/config error.

#include "vizbridge/config.hpp"
#include "vizbridge/goal_controller.hpp"
#include "vizbridge/mcp_server.hpp"
#include "vizbridge/mock_engine.hpp"
#include "vizbridge/paraview_adapter.hpp"
#include "vizbridge/tool_registry.hpp"
#include "vizbridge/trace_harness.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>

namespace {

using namespace vizbridge;

constexpr const char* kRadialSpec = R"({"family":"radial"})";

std::unique_ptr<Engine> make_engine(const ServerConfig& config)
{
    if (config.backend == "paraview") {
        const auto [host, port] = parse_host_port(config.pvserver_url);
        auto channel = std::make_unique<paraview::PvPythonChannel>(host, port);
        return std::make_unique<paraview::ParaViewEngine>(std::move(channel));
    }
    return std::make_unique<MockEngine>();
}

int run_serve(const ServerConfig& config)
{
    auto engine = make_engine(config);
    SessionContext session(*engine, config.screenshot_dir);
    ToolRegistry registry(session);
    mcp::McpServer server(registry);

    std::ofstream log_file;
    if (!config.log_path.empty()) {
        log_file.open(config.log_path, std::ios::app);
        if (!log_file)
            throw ConfigError("cannot open log file " + config.log_path.string());
        server.set_log(&log_file);
    } else {
        server.set_log(&std::cerr);
    }

    if (!config.mock_dataset.empty()) {
        const ToolResult preload =
            registry.call("load_data", {{"path_or_spec", config.mock_dataset}});
        if (preload.is_error)
            throw ConfigError("cannot preload dataset: " + preload.first_text());
    }

    std::signal(SIGINT, [](int) { std::_Exit(0); });
    server.run_serve_loop(std::cin, std::cout);
    return 0;
}

int run_replay(const ServerConfig& config, const std::string& trace_path)
{
    const Trace trace = Trace::load(trace_path);

    ServerConfig effective = config;
    effective.backend = trace.backend;
    if (effective.backend != "mock" && effective.backend != "paraview")
        throw ConfigError("trace names unknown backend '" + effective.backend + "'");
    if (effective.backend == "paraview" && effective.pvserver_url.empty())
        throw ConfigError("trace requires the paraview backend; pass --pvserver-url");

    auto engine = make_engine(effective);
    SessionContext session(*engine, effective.screenshot_dir);
    ToolRegistry registry(session);
    mcp::McpServer server(registry);

    const ReplayReport report = replay(trace, server);
    std::cout << report.summary();
    if (report.all_passed) {
        std::cout << "replay passed (" << report.steps.size() << " steps)\n";
        return 0;
    }
    std::cout << "replay failed at step " << report.failed_index << "\n";
    return 1;
}

json payload_or_fail(const ToolResult& result, const std::string& what)
{
    if (result.is_error)
        throw ConfigError(what + " failed: " + result.first_text());
    const auto payload = result.payload();
    if (!payload)
        throw ConfigError(what + " returned no payload");
    return *payload;
}

int run_demo(const ServerConfig& config, const std::string& goal_name)
{
    if (goal_name != "iso-half" && goal_name != "tf-bands")
        throw ConfigError("unknown demo goal '" + goal_name +
                          "' (available: iso-half, tf-bands)");

    auto engine = make_engine(config);
    SessionContext session(*engine, config.screenshot_dir);
    ToolRegistry registry(session);
    const ToolInvoker tools = [&](const std::string& name, const json& args) {
        return registry.call(name, args);
    };

    const std::string dataset =
        config.mock_dataset.empty() ? kRadialSpec : config.mock_dataset;
    const json loaded =
        payload_or_fail(registry.call("load_data", {{"path_or_spec", dataset}}), "load_data");
    const double lo = loaded.at("scalar_range").at(0).get<double>();
    const double hi = loaded.at("scalar_range").at(1).get<double>();

    if (goal_name == "iso-half") {
        const double reference_value = (0.4 > lo && 0.4 < hi) ? 0.4 : 0.5 * (lo + hi);
        const json contour = payload_or_fail(
            registry.call("create_isosurface", {{"value", reference_value}}),
            "create_isosurface");
        if (!contour.contains("area"))
            throw ConfigError("reference surface area is unavailable for this dataset");

        AreaGoal goal;
        goal.contour_id = contour.at("id").get<std::string>();
        goal.reference_area = contour.at("area").get<double>();
        goal.target_fraction = 0.5;

        const AreaSolveResult solved = solve_iso_area(goal, tools);
        json out{{"goal", "iso-half"},
                 {"reference_value", reference_value},
                 {"reference_area", goal.reference_area},
                 {"target_area", goal.target_fraction * goal.reference_area},
                 {"isovalue", solved.isovalue},
                 {"trace", solved.trace.to_json()}};
        std::cout << out.dump(2) << "\n";
        return solved.trace.converged ? 0 : 1;
    }

    // tf-bands: brown base band, green upper band, placed relative to the
    // scalar range so the demo works on any dataset.
    payload_or_fail(registry.call("toggle_volume_rendering", json::object()),
                    "toggle_volume_rendering");
    const double span = hi - lo;
    BandColorGoal goal;
    goal.bands = {{lo, lo + 0.35 * span, {0.55, 0.27, 0.07}},
                  {lo + 0.58 * span, hi, {0.0, 0.8, 0.0}}};

    const TfRefineResult refined = refine_transfer_function(goal, tools);
    json out{{"goal", "tf-bands"},
             {"transfer_function", refined.tf.to_json()},
             {"trace", refined.trace.to_json()}};
    std::cout << out.dump(2) << "\n";
    return refined.trace.converged ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"vizbridge: schema-described MCP control of a visualization pipeline engine"};
    app.require_subcommand(1);
    app.fallthrough();

    ConfigOverrides overrides;
    std::string backend, pvserver_url, screenshot_dir, log_path, mock_dataset, config_file;
    app.add_option("--backend", backend, "Engine backend: mock or paraview");
    app.add_option("--pvserver-url", pvserver_url, "pvserver address host:port");
    app.add_option("--screenshot-dir", screenshot_dir,
                   "Directory for screenshots and the session log");
    app.add_option("--log", log_path, "Diagnostic log file (default: stderr)");
    app.add_option("--mock-dataset", mock_dataset, "Field-spec JSON to preload");
    app.add_option("--config", config_file, "JSON config file mirroring these flags");

    auto* serve_cmd = app.add_subcommand("serve", "Run the MCP server over stdin/stdout");
    std::string trace_path;
    auto* replay_cmd = app.add_subcommand("replay", "Replay a recorded tool-call trace");
    replay_cmd->add_option("trace", trace_path, "Trace JSON file")->required();
    std::string goal_name;
    auto* demo_cmd = app.add_subcommand("demo", "Run a goal controller end-to-end");
    demo_cmd->add_option("goal", goal_name, "Goal name: iso-half or tf-bands")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (!backend.empty())
        overrides.backend = backend;
    if (!pvserver_url.empty())
        overrides.pvserver_url = pvserver_url;
    if (!screenshot_dir.empty())
        overrides.screenshot_dir = screenshot_dir;
    if (!log_path.empty())
        overrides.log_path = log_path;
    if (!mock_dataset.empty())
        overrides.mock_dataset = mock_dataset;
    if (!config_file.empty())
        overrides.config_file = config_file;

    try {
        const ServerConfig config = resolve_config(overrides);
        if (serve_cmd->parsed())
            return run_serve(config);
        if (replay_cmd->parsed())
            return run_replay(config, trace_path);
        if (demo_cmd->parsed())
            return run_demo(config, goal_name);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const TraceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const GoalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
