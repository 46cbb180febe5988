#include <doctest.h>

#include "vizbridge/goal_controller.hpp"
#include "vizbridge/mock_engine.hpp"
#include "vizbridge/tool_registry.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

using namespace vizbridge;

namespace {

constexpr const char* kRadial = R"({"family":"radial"})";

struct ControllerFixture {
    MockEngine engine;
    SessionContext session;
    ToolRegistry registry;
    int tool_calls = 0;

    ControllerFixture()
        : session(engine, std::filesystem::temp_directory_path() /
                              ("vizbridge-goal-" + std::to_string(::getpid()) + "-" +
                               std::to_string(counter++))),
          registry(session)
    {
    }

    ToolInvoker tools()
    {
        return [this](const std::string& name, const json& args) {
            ++tool_calls;
            return registry.call(name, args);
        };
    }

    json payload(const ToolResult& result)
    {
        REQUIRE(!result.is_error);
        const auto p = result.payload();
        REQUIRE(p.has_value());
        return *p;
    }

    /// radial reader + contour at v0; returns (contour id, reference area)
    std::pair<SourceId, double> radial_contour(double v0)
    {
        (void)payload(registry.call("load_data", {{"path_or_spec", kRadial}}));
        const json contour = payload(registry.call("create_isosurface", {{"value", v0}}));
        return {contour.at("id").get<std::string>(), contour.at("area").get<double>()};
    }

    static int counter;
};

int ControllerFixture::counter = 0;

int count_area_evaluations(const RefinementTrace& trace)
{
    return static_cast<int>(trace.iterations.size());
}

void check_best_so_far_nonincreasing(const RefinementTrace& trace)
{
    double best = std::numeric_limits<double>::infinity();
    for (const auto& it : trace.iterations) {
        const double err = it.measurement_failed ? std::numeric_limits<double>::infinity()
                                                 : it.error;
        const double new_best = std::min(best, err);
        CHECK(new_best <= best);
        best = new_best;
    }
}

} // namespace

TEST_CASE("solve_iso_area reaches the half-area isovalue on the radial field")
{
    ControllerFixture fx;
    const auto [contour_id, reference_area] = fx.radial_contour(0.4);
    CHECK(reference_area ==
          doctest::Approx(4.0 * std::numbers::pi * 0.16).epsilon(1e-12));

    AreaGoal goal;
    goal.contour_id = contour_id;
    goal.reference_area = reference_area;
    goal.target_fraction = 0.5;

    const AreaSolveResult result = solve_iso_area(goal, fx.tools());

    // Independent oracle: brute-force scan of 4*pi*v^2 over (0, 0.5] for the
    // value whose area is closest to half the reference.
    const double target = 0.5 * reference_area;
    double oracle_v = 0.0, oracle_err = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= 200000; ++i) {
        const double v = 0.5 * i / 200000.0;
        const double err = std::abs(4.0 * std::numbers::pi * v * v - target);
        if (err < oracle_err) {
            oracle_err = err;
            oracle_v = v;
        }
    }
    const double analytic = 0.4 / std::sqrt(2.0);
    CHECK(oracle_v == doctest::Approx(analytic).epsilon(1e-4));  // oracle agrees with algebra

    CHECK(result.trace.converged);
    CHECK(std::abs(result.isovalue - analytic) / analytic <= 0.01);
    CHECK(count_area_evaluations(result.trace) <= 30);

    // the contour was left at the solution, visible through the tool path
    const json area = fx.payload(fx.registry.call("get_surface_area", json::object()));
    CHECK(std::abs(area.at("area").get<double>() - target) / target <= goal.rel_tol);

    check_best_so_far_nonincreasing(result.trace);
}

TEST_CASE("solve_iso_area with target_fraction=1 stays near the reference value")
{
    ControllerFixture fx;
    const auto [contour_id, reference_area] = fx.radial_contour(0.4);

    AreaGoal goal;
    goal.contour_id = contour_id;
    goal.reference_area = reference_area;
    goal.target_fraction = 1.0;

    const AreaSolveResult result = solve_iso_area(goal, fx.tools());
    CHECK(result.trace.converged);
    const double area = 4.0 * std::numbers::pi * result.isovalue * result.isovalue;
    CHECK(std::abs(area - reference_area) / reference_area <= goal.rel_tol);
    CHECK(result.isovalue == doctest::Approx(0.4).epsilon(0.01));
}

TEST_CASE("solve_iso_area reports constant-area targets as unattainable")
{
    ControllerFixture fx;
    (void)fx.payload(
        fx.registry.call("load_data", {{"path_or_spec", R"({"family":"linear_x"})"}}));
    const json contour = fx.payload(fx.registry.call("create_isosurface", {{"value", 0.5}}));

    AreaGoal goal;
    goal.contour_id = contour.at("id").get<std::string>();
    goal.reference_area = contour.at("area").get<double>();  // exactly 1
    goal.target_fraction = 0.5;

    try {
        (void)solve_iso_area(goal, fx.tools());
        FAIL("expected GoalError");
    } catch (const GoalError& e) {
        const std::string message = e.what();
        CHECK(message.find("target unattainable") != std::string::npos);
        CHECK(message.find("(0.0") != std::string::npos);  // the scanned (value, area) table
    }
}

TEST_CASE("solve_iso_area detects non-monotone areas inside the bracket")
{
    // shells with period 0.28: the two-shell regime ends at v = 0.22, where
    // the area drops discontinuously. A target of 0.9 is first bracketed
    // across that cliff, and the bisection midpoint falls below both bracket
    // areas, so the solver must refuse to certify a root.
    ControllerFixture fx;
    (void)fx.payload(fx.registry.call(
        "load_data", {{"path_or_spec", R"({"family":"shells","shell_period":0.28})"}}));
    const json contour = fx.payload(fx.registry.call("create_isosurface", {{"value", 0.1}}));

    AreaGoal goal;
    goal.contour_id = contour.at("id").get<std::string>();
    goal.reference_area = 1.8;
    goal.target_fraction = 0.5;  // target area 0.9

    CHECK_THROWS_WITH_AS((void)solve_iso_area(goal, fx.tools()),
                         doctest::Contains("non-monotone"), GoalError);
}

TEST_CASE("an exhausted budget reports the best candidate without claiming success")
{
    ControllerFixture fx;
    const auto [contour_id, reference_area] = fx.radial_contour(0.4);

    AreaGoal goal;
    goal.contour_id = contour_id;
    goal.reference_area = reference_area;
    goal.target_fraction = 0.5;
    goal.rel_tol = 1e-13;  // unreachable inside the budget
    goal.max_iters = 20;

    const AreaSolveResult result = solve_iso_area(goal, fx.tools());
    CHECK(!result.trace.converged);
    CHECK(count_area_evaluations(result.trace) == goal.max_iters);

    // the contour was parked at the reported value
    const json active = fx.payload(fx.registry.call("get_active_source", json::object()));
    CHECK(active["active"]["params"]["value"].get<double>() == result.isovalue);
    // and that value is the best one seen in the trace
    double best_err = std::numeric_limits<double>::infinity();
    double best_value = 0.0;
    for (const auto& it : result.trace.iterations) {
        if (!it.measurement_failed && it.error < best_err) {
            best_err = it.error;
            best_value = it.candidate["value"].get<double>();
        }
    }
    CHECK(result.isovalue == best_value);
}

TEST_CASE("solve_iso_area never probes outside the declared search range")
{
    ControllerFixture fx;
    const auto [contour_id, reference_area] = fx.radial_contour(0.4);

    AreaGoal goal;
    goal.contour_id = contour_id;
    goal.reference_area = reference_area;
    goal.target_fraction = 0.5;
    goal.search_range = ScalarRange{0.01, 0.5};

    std::vector<double> probed;
    const ToolInvoker base = fx.tools();
    const ToolInvoker spy = [&](const std::string& name, const json& args) {
        if (name == "update_isosurface")
            probed.push_back(args.at("value").get<double>());
        return base(name, args);
    };

    const AreaSolveResult result = solve_iso_area(goal, spy);
    CHECK(result.trace.converged);
    CHECK(!probed.empty());
    for (double v : probed) {
        CHECK(v >= goal.search_range->lo);
        CHECK(v <= goal.search_range->hi);
    }
    // with the whole search range in the closed-form regime nothing fails
    for (const auto& it : result.trace.iterations)
        CHECK(!it.measurement_failed);
}

TEST_CASE("bisection lands within the bracket-width bound of the analytic inverse")
{
    ControllerFixture fx;
    const auto [contour_id, reference_area] = fx.radial_contour(0.4);

    std::mt19937 rng(23);
    std::uniform_real_distribution<double> fractions(0.05, 1.0);

    for (int round = 0; round < 25; ++round) {
        AreaGoal goal;
        goal.contour_id = contour_id;
        goal.reference_area = reference_area;
        goal.target_fraction = fractions(rng);
        goal.rel_tol = 1e-4;  // force several bisection steps
        goal.max_iters = 60;
        goal.search_range = ScalarRange{1e-3, 0.5};

        const AreaSolveResult result = solve_iso_area(goal, fx.tools());
        REQUIRE(result.trace.converged);

        const double target = goal.target_fraction * reference_area;
        const double true_v = std::sqrt(target / (4.0 * std::numbers::pi));
        const int bisection_steps = count_area_evaluations(result.trace) - 16;
        REQUIRE(bisection_steps >= 0);
        const double scan_cell = (goal.search_range->hi - goal.search_range->lo) / 16.0;
        const double bound = scan_cell / std::pow(2.0, bisection_steps) + 1e-12;
        CHECK(std::abs(result.isovalue - true_v) <= bound + true_v * goal.rel_tol);

        check_best_so_far_nonincreasing(result.trace);
    }
}

TEST_CASE("controllers speak only through the tool surface (session log covers every probe)")
{
    ControllerFixture fx;
    const auto [contour_id, reference_area] = fx.radial_contour(0.4);

    std::ifstream before_stream(fx.session.session_log_path());
    std::size_t before = 0;
    for (std::string line; std::getline(before_stream, line);)
        ++before;

    AreaGoal goal;
    goal.contour_id = contour_id;
    goal.reference_area = reference_area;
    goal.target_fraction = 0.5;
    const int calls_before = fx.tool_calls;
    (void)solve_iso_area(goal, fx.tools());
    const int controller_calls = fx.tool_calls - calls_before;

    std::ifstream after_stream(fx.session.session_log_path());
    std::size_t after = 0;
    for (std::string line; std::getline(after_stream, line);)
        ++after;

    CHECK(controller_calls > 0);
    CHECK(after - before == static_cast<std::size_t>(controller_calls));
}

// ---------------------------------------------------------------------------
// Transfer-function refinement
// ---------------------------------------------------------------------------

namespace {

// Test-local piecewise-linear evaluation, independent of the engine's.
std::array<double, 3> lerp_color(const std::vector<std::array<double, 4>>& points, double s)
{
    if (points.empty())
        return {0, 0, 0};
    if (s <= points.front()[0])
        return {points.front()[1], points.front()[2], points.front()[3]};
    if (s >= points.back()[0])
        return {points.back()[1], points.back()[2], points.back()[3]};
    for (std::size_t i = 1; i < points.size(); ++i) {
        if (s <= points[i][0]) {
            const double t = (s - points[i - 1][0]) / (points[i][0] - points[i - 1][0]);
            std::array<double, 3> out{};
            for (int c = 0; c < 3; ++c)
                out[c] = points[i - 1][c + 1] + t * (points[i][c + 1] - points[i - 1][c + 1]);
            return out;
        }
    }
    return {points.back()[1], points.back()[2], points.back()[3]};
}

// Independent simulation of the damped update loop against the 8-band
// stripe evaluator. Returns the per-iteration max errors.
std::vector<double> simulate_refinement(const ScalarRange& range,
                                        std::vector<std::array<double, 4>> tf_points,
                                        const std::vector<GoalBand>& bands, double tol,
                                        int max_iters)
{
    const double span = range.hi - range.lo;
    std::vector<std::optional<std::array<double, 3>>> working(bands.size());
    std::vector<double> errors;

    for (int iter = 0; iter < max_iters; ++iter) {
        std::vector<std::array<double, 3>> measured;
        for (const auto& band : bands) {
            const double mid = 0.5 * (band.lo + band.hi);
            int b = static_cast<int>((mid - range.lo) / span * 8.0);
            b = std::clamp(b, 0, 7);
            const double report_mid = range.lo + span * (b + 0.5) / 8.0;
            measured.push_back(lerp_color(tf_points, report_mid));
        }
        double error = 0.0;
        for (std::size_t i = 0; i < bands.size(); ++i)
            for (int c = 0; c < 3; ++c)
                error = std::max(error, std::abs(measured[i][c] - bands[i].target[c]));
        errors.push_back(error);
        if (error <= tol)
            break;

        for (std::size_t i = 0; i < bands.size(); ++i) {
            double band_error = 0.0;
            for (int c = 0; c < 3; ++c)
                band_error = std::max(band_error, std::abs(measured[i][c] - bands[i].target[c]));
            if (band_error <= tol)
                continue;
            const std::array<double, 3> base = working[i] ? *working[i] : measured[i];
            std::array<double, 3> next{};
            for (int c = 0; c < 3; ++c)
                next[c] = std::clamp(base[c] + 0.5 * (bands[i].target[c] - base[c]), 0.0, 1.0);
            working[i] = next;
        }

        tf_points.clear();
        for (std::size_t i = 0; i < bands.size(); ++i)
            if (working[i])
                tf_points.push_back({0.5 * (bands[i].lo + bands[i].hi), (*working[i])[0],
                                     (*working[i])[1], (*working[i])[2]});
        std::sort(tf_points.begin(), tf_points.end());
        if (tf_points.size() == 1) {
            std::size_t only = 0;
            while (!working[only])
                ++only;
            const auto c = *working[only];
            tf_points = {{bands[only].lo, c[0], c[1], c[2]},
                         {bands[only].hi, c[0], c[1], c[2]}};
        }
    }
    return errors;
}

} // namespace

TEST_CASE("refine_transfer_function matches the brown/green goal within tolerance")
{
    ControllerFixture fx;
    (void)fx.payload(fx.registry.call("load_data", {{"path_or_spec", kRadial}}));
    (void)fx.payload(fx.registry.call("toggle_volume_rendering", json::object()));
    const double hi = std::sqrt(3.0) / 2.0;

    BandColorGoal goal;
    goal.bands = {{0.0, 0.3, {0.55, 0.27, 0.07}}, {0.5, 0.87, {0.0, 0.8, 0.0}}};

    const TfRefineResult result = refine_transfer_function(goal, fx.tools());

    CHECK(result.trace.converged);
    CHECK(static_cast<int>(result.trace.iterations.size()) <= goal.max_iters);
    CHECK(result.trace.iterations.back().error <= goal.color_tol);
    check_best_so_far_nonincreasing(result.trace);

    // the final render's band report matches both targets
    const json shot = fx.payload(fx.registry.call("take_screenshot", json::object()));
    const json& report = shot["band_report"];
    const auto check_band = [&](const GoalBand& band) {
        const double mid = 0.5 * (std::max(band.lo, 0.0) + std::min(band.hi, hi));
        for (const auto& row : report) {
            if (mid >= row["lo"].get<double>() && mid < row["hi"].get<double>()) {
                CHECK(std::abs(row["r"].get<double>() - band.target[0]) <= goal.color_tol);
                CHECK(std::abs(row["g"].get<double>() - band.target[1]) <= goal.color_tol);
                CHECK(std::abs(row["b"].get<double>() - band.target[2]) <= goal.color_tol);
            }
        }
    };
    check_band(goal.bands[0]);
    check_band(goal.bands[1]);

    SUBCASE("the independent simulation reproduces the error sequence")
    {
        const ScalarRange range{0.0, hi};
        const std::vector<GoalBand> clamped = {{0.0, 0.3, goal.bands[0].target},
                                               {0.5, hi, goal.bands[1].target}};
        const auto sim = simulate_refinement(
            range, {{0.0, 0.0, 0.0, 1.0}, {hi, 1.0, 0.0, 0.0}}, clamped, goal.color_tol, 10);
        REQUIRE(sim.size() == result.trace.iterations.size());
        for (std::size_t i = 0; i < sim.size(); ++i)
            CHECK(sim[i] == doctest::Approx(result.trace.iterations[i].error).epsilon(1e-9));
    }
}

TEST_CASE("refine_transfer_function returns immediately when already satisfied")
{
    ControllerFixture fx;
    (void)fx.payload(fx.registry.call("load_data", {{"path_or_spec", kRadial}}));
    (void)fx.payload(fx.registry.call("toggle_volume_rendering", json::object()));
    (void)fx.payload(fx.registry.call(
        "set_color_map",
        {{"points", json::array({{0.0, 0.55, 0.27, 0.07}, {0.86, 0.55, 0.27, 0.07}})}}));

    BandColorGoal goal;
    goal.bands = {{0.1, 0.4, {0.55, 0.27, 0.07}}};

    const TfRefineResult result = refine_transfer_function(goal, fx.tools());
    CHECK(result.trace.converged);
    CHECK(result.trace.iterations.size() == 1);
    CHECK(result.tf.color_points.empty());  // nothing was applied
}

TEST_CASE("refine_transfer_function rejects bands outside the scalar range")
{
    ControllerFixture fx;
    (void)fx.payload(fx.registry.call("load_data", {{"path_or_spec", kRadial}}));
    (void)fx.payload(fx.registry.call("toggle_volume_rendering", json::object()));

    BandColorGoal goal;
    goal.bands = {{1.5, 2.0, {1, 0, 0}}};
    CHECK_THROWS_WITH_AS((void)refine_transfer_function(goal, fx.tools()),
                         doctest::Contains("outside the scalar range"), GoalError);

    BandColorGoal overlapping;
    overlapping.bands = {{0.0, 0.4, {1, 0, 0}}, {0.3, 0.6, {0, 1, 0}}};
    CHECK_THROWS_WITH_AS((void)refine_transfer_function(overlapping, fx.tools()),
                         doctest::Contains("overlap"), GoalError);
}

TEST_CASE("refine_transfer_function fails cleanly without a volume representation")
{
    ControllerFixture fx;
    (void)fx.payload(fx.registry.call("load_data", {{"path_or_spec", kRadial}}));
    // no toggle_volume_rendering: the first set_color_map cannot apply

    BandColorGoal goal;
    goal.bands = {{0.0, 0.3, {0.55, 0.27, 0.07}}};
    CHECK_THROWS_WITH_AS((void)refine_transfer_function(goal, fx.tools()),
                         doctest::Contains("volume"), GoalError);
}

TEST_CASE("the default evaluator needs a band report")
{
    ToolResult no_report =
        ToolResult::text("screenshot saved\n\n```json\n{\"path\":\"x\"}\n```");
    const std::vector<GoalBand> bands = {{0.0, 0.5, {1, 0, 0}}};
    CHECK_THROWS_WITH_AS((void)band_report_evaluator()(no_report, bands),
                         doctest::Contains("no feedback channel"), GoalError);
}

TEST_CASE("a custom evaluator is a drop-in substitute")
{
    ControllerFixture fx;
    (void)fx.payload(fx.registry.call("load_data", {{"path_or_spec", kRadial}}));
    (void)fx.payload(fx.registry.call("toggle_volume_rendering", json::object()));

    // A "vision model" that always reports the target color: converges on
    // the first look without touching the transfer function.
    int evaluations = 0;
    const BandEvaluator oracle_eyes =
        [&](const ToolResult&, const std::vector<GoalBand>& bands) {
            ++evaluations;
            std::vector<std::array<double, 3>> out;
            for (const auto& band : bands)
                out.push_back(band.target);
            return out;
        };

    BandColorGoal goal;
    goal.bands = {{0.0, 0.3, {0.2, 0.4, 0.6}}};
    const TfRefineResult result = refine_transfer_function(goal, fx.tools(), oracle_eyes);
    CHECK(result.trace.converged);
    CHECK(evaluations == 1);
}

TEST_CASE("per-iteration contraction bound holds for random goals and ramps")
{
    std::mt19937 rng(101);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double hi = std::sqrt(3.0) / 2.0;

    for (int round = 0; round < 15; ++round) {
        ControllerFixture fx;
        (void)fx.payload(fx.registry.call("load_data", {{"path_or_spec", kRadial}}));
        (void)fx.payload(fx.registry.call("toggle_volume_rendering", json::object()));

        // random starting ramp (2..4 points)
        const int n_start = 2 + static_cast<int>(unit(rng) * 2.99);
        json start_points = json::array();
        for (int i = 0; i < n_start; ++i) {
            const double s = hi * (i + unit(rng) * 0.8) / n_start;
            start_points.push_back({s, unit(rng), unit(rng), unit(rng)});
        }
        (void)fx.payload(fx.registry.call("set_color_map", {{"points", start_points}}));
        const TransferFunction start_tf = fx.engine.transfer_function(
            fx.engine.list_sources(SourceKind::volume_repr, {})[0].id);

        // 1-2 random non-overlapping bands
        BandColorGoal goal;
        goal.max_iters = 8;
        const int n_bands = 1 + static_cast<int>(unit(rng) * 1.99);
        double cursor = 0.0;
        for (int b = 0; b < n_bands && cursor < hi * 0.7; ++b) {
            const double lo = cursor + unit(rng) * 0.15;
            const double width = 0.08 + unit(rng) * 0.2;
            const double band_hi = std::min(lo + width, hi);
            if (band_hi - lo < 0.02)
                break;
            goal.bands.push_back({lo, band_hi, {unit(rng), unit(rng), unit(rng)}});
            cursor = band_hi + 0.02;
        }
        if (goal.bands.empty())
            continue;

        const TfRefineResult result = refine_transfer_function(goal, fx.tools());
        const auto& iters = result.trace.iterations;

        // Reconstruct the transfer function of each iteration and verify
        //   err_{k+1} <= 0.5*err_k + leak_{k+1} + 0.5*leak_k
        // per violating band and channel, where leak is the gap between the
        // band-midpoint color and the quantized report-band midpoint color.
        auto tf_of_iteration = [&](std::size_t k) {
            std::vector<std::array<double, 4>> points;
            const json& candidate = iters[k].candidate["color_points"];
            if (candidate.empty()) {
                for (const auto& p : start_tf.color_points)
                    points.push_back({p.scalar, p.r, p.g, p.b});
            } else {
                for (const auto& p : candidate)
                    points.push_back({p[0].get<double>(), p[1].get<double>(),
                                      p[2].get<double>(), p[3].get<double>()});
            }
            return points;
        };

        for (std::size_t k = 0; k + 1 < iters.size(); ++k) {
            const auto tf_k = tf_of_iteration(k);
            const auto tf_next = tf_of_iteration(k + 1);
            for (std::size_t b = 0; b < goal.bands.size(); ++b) {
                const double lo = std::max(goal.bands[b].lo, 0.0);
                const double bhi = std::min(goal.bands[b].hi, hi);
                const double mid = 0.5 * (lo + bhi);
                int band = static_cast<int>(mid / hi * 8.0);
                band = std::clamp(band, 0, 7);
                const double report_mid = hi * (band + 0.5) / 8.0;

                const json& measured_k = iters[k].measurement[b]["measured"];
                const json& measured_next = iters[k + 1].measurement[b]["measured"];
                for (int c = 0; c < 3; ++c) {
                    const double err_k =
                        std::abs(measured_k[c].get<double>() - goal.bands[b].target[c]);
                    if (err_k <= goal.color_tol)
                        continue;  // band not updated this iteration
                    const double err_next =
                        std::abs(measured_next[c].get<double>() - goal.bands[b].target[c]);
                    const double leak_k =
                        std::abs(lerp_color(tf_k, report_mid)[c] - lerp_color(tf_k, mid)[c]);
                    const double leak_next = std::abs(lerp_color(tf_next, report_mid)[c] -
                                                      lerp_color(tf_next, mid)[c]);
                    CHECK(err_next <= 0.5 * err_k + leak_next + 0.5 * leak_k + 1e-9);
                }
            }
        }
    }
}
