#include "vizbridge/goal_controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace vizbridge {

json IterationRecord::to_json() const
{
    return {{"candidate", candidate},
            {"measurement", measurement},
            {"error", measurement_failed ? json() : json(error)},
            {"failed", measurement_failed}};
}

json RefinementTrace::to_json() const
{
    json iters = json::array();
    for (const auto& it : iterations)
        iters.push_back(it.to_json());
    return {{"iterations", iters}, {"converged", converged}, {"final", final_params}};
}

namespace {

/// One tool round trip that must succeed; failures surface as GoalError.
json invoke_expect_payload(const ToolInvoker& tools, const std::string& tool, const json& args)
{
    const ToolResult result = tools(tool, args);
    if (result.is_error)
        throw GoalError(tool + " failed: " + result.first_text());
    const auto payload = result.payload();
    if (!payload)
        throw GoalError(tool + " returned no structured payload");
    return *payload;
}

double payload_number(const json& payload, const char* key, const std::string& tool)
{
    const json* v = find_path(payload, key);
    if (!v || !v->is_number())
        throw GoalError(tool + " payload is missing numeric field '" + key + "'");
    return v->get<double>();
}

struct AreaProbe {
    double value = 0.0;
    double area = 0.0;
    bool ok = false;
    std::string failure;
};

} // namespace

AreaSolveResult solve_iso_area(const AreaGoal& goal, const ToolInvoker& tools)
{
    if (!(goal.target_fraction > 0.0) || goal.target_fraction > 1.0)
        throw GoalError("target_fraction must be in (0, 1]");
    if (!(goal.reference_area > 0.0))
        throw GoalError("reference_area must be positive");

    const double target = goal.target_fraction * goal.reference_area;

    // All probing happens through the agent-visible tool path against the
    // goal's contour, so make it the active source first.
    invoke_expect_payload(tools, "set_active_source", {{"name_or_id", goal.contour_id}});

    ScalarRange search;
    if (goal.search_range) {
        search = *goal.search_range;
    } else {
        const json range = invoke_expect_payload(tools, "get_scalar_range", json::object());
        search.lo = payload_number(range, "lo", "get_scalar_range");
        search.hi = payload_number(range, "hi", "get_scalar_range");
    }
    if (!(search.hi > search.lo))
        throw GoalError("empty search range");

    AreaSolveResult out;
    int evaluations = 0;

    // One update_isosurface + get_surface_area round trip. Failed area reads
    // (e.g. values without a closed form) count against the budget and are
    // recorded, but do not abort the search.
    auto evaluate = [&](double value) -> AreaProbe {
        AreaProbe probe;
        probe.value = value;
        ++evaluations;

        const ToolResult moved = tools("update_isosurface", {{"value", value}});
        if (moved.is_error)
            throw GoalError("update_isosurface failed: " + moved.first_text());

        const ToolResult read = tools("get_surface_area", json::object());
        IterationRecord record;
        record.candidate = {{"value", value}};
        if (read.is_error) {
            probe.failure = read.first_text();
            record.measurement = {{"error", probe.failure}};
            record.measurement_failed = true;
            record.error = std::numeric_limits<double>::infinity();
        } else {
            const auto payload = read.payload();
            if (!payload)
                throw GoalError("get_surface_area returned no structured payload");
            probe.area = payload_number(*payload, "area", "get_surface_area");
            probe.ok = true;
            record.measurement = {{"area", probe.area}};
            record.error = std::abs(probe.area - target) / target;
        }
        out.trace.iterations.push_back(record);
        return probe;
    };

    auto finish = [&](double value) {
        out.isovalue = value;
        out.trace.converged = true;
        out.trace.final_params = {{"value", value}};
        return out;
    };

    // Phase 1: scan 16 interior points for a bracketing pair around target.
    constexpr int kScanPoints = 16;
    std::vector<AreaProbe> scan;
    for (int i = 0; i < kScanPoints && evaluations < goal.max_iters; ++i) {
        const double v = search.lo + (search.hi - search.lo) * (i + 0.5) / kScanPoints;
        const AreaProbe probe = evaluate(v);
        if (probe.ok && std::abs(probe.area - target) / target <= goal.rel_tol)
            return finish(v);
        scan.push_back(probe);
    }

    std::optional<std::pair<AreaProbe, AreaProbe>> bracket;
    for (std::size_t i = 0; i + 1 < scan.size(); ++i) {
        const AreaProbe& a = scan[i];
        const AreaProbe& b = scan[i + 1];
        if (a.ok && b.ok && (a.area - target) * (b.area - target) < 0.0) {
            bracket = {a, b};
            break;
        }
    }
    if (!bracket) {
        std::ostringstream msg;
        msg << "target unattainable: no bracketing pair around area " << format_double(target)
            << "; scanned (value, area):";
        for (const auto& p : scan) {
            msg << "\n- (" << format_double(p.value) << ", ";
            if (p.ok)
                msg << format_double(p.area) << ")";
            else
                msg << "unavailable: " << p.failure << ")";
        }
        throw GoalError(msg.str());
    }

    // Phase 2: bisection inside the bracket.
    AreaProbe lo = bracket->first;
    AreaProbe hi = bracket->second;
    double best_value = std::abs(lo.area - target) <= std::abs(hi.area - target) ? lo.value
                                                                                 : hi.value;
    double best_error = std::min(std::abs(lo.area - target), std::abs(hi.area - target)) / target;

    while (evaluations < goal.max_iters) {
        const double mid = 0.5 * (lo.value + hi.value);
        const AreaProbe probe = evaluate(mid);
        if (!probe.ok)
            throw GoalError("surface area became unavailable inside the bracket at value " +
                            format_double(mid) + ": " + probe.failure);

        // The bracket ordering must stay consistent with a monotone area
        // function; anything else means bisection cannot certify a root.
        const double band_lo = std::min(lo.area, hi.area);
        const double band_hi = std::max(lo.area, hi.area);
        const double slack = 1e-9 * std::max(1.0, band_hi);
        if (probe.area < band_lo - slack || probe.area > band_hi + slack)
            throw GoalError("non-monotone surface area inside the bracket (value " +
                            format_double(mid) + " gave area " + format_double(probe.area) +
                            " outside [" + format_double(band_lo) + ", " +
                            format_double(band_hi) + "]); explore manually");

        const double rel = std::abs(probe.area - target) / target;
        if (rel < best_error) {
            best_error = rel;
            best_value = mid;
        }
        if (rel <= goal.rel_tol)
            return finish(mid);

        if ((probe.area - target) * (lo.area - target) < 0.0)
            hi = probe;
        else
            lo = probe;
    }

    // Budget exhausted: park the contour at the best candidate and report it
    // without claiming success.
    (void)tools("update_isosurface", {{"value", best_value}});
    out.isovalue = best_value;
    out.trace.converged = false;
    out.trace.final_params = {{"value", best_value}};
    return out;
}

// ---------------------------------------------------------------------------
// Transfer-function refinement
// ---------------------------------------------------------------------------

BandEvaluator band_report_evaluator()
{
    return [](const ToolResult& screenshot,
              const std::vector<GoalBand>& bands) -> std::vector<std::array<double, 3>> {
        const auto payload = screenshot.payload();
        if (!payload || !payload->contains("band_report"))
            throw GoalError("no feedback channel: screenshot carries no band report and no "
                            "other evaluator was supplied");
        const json& report = (*payload)["band_report"];

        std::vector<std::array<double, 3>> measured;
        measured.reserve(bands.size());
        for (const auto& band : bands) {
            const double mid = 0.5 * (band.lo + band.hi);
            const json* row = nullptr;
            for (const auto& r : report) {
                const double lo = r.at("lo").get<double>();
                const double hi = r.at("hi").get<double>();
                if (mid >= lo && (mid < hi || &r == &report.back()))
                    row = &r;
            }
            if (row == nullptr)
                throw GoalError("band midpoint " + format_double(mid) +
                                " lies outside the reported scalar range");
            measured.push_back({row->at("r").get<double>(), row->at("g").get<double>(),
                                row->at("b").get<double>()});
        }
        return measured;
    };
}

namespace {

json color_points_json(const std::vector<ColorPoint>& points)
{
    json out = json::array();
    for (const auto& p : points)
        out.push_back({p.scalar, p.r, p.g, p.b});
    return out;
}

} // namespace

TfRefineResult refine_transfer_function(const BandColorGoal& goal, const ToolInvoker& tools,
                                        const BandEvaluator& evaluator)
{
    if (goal.bands.empty())
        throw GoalError("goal has no bands");

    // Clamp goal bands to the active scalar range; a band that misses the
    // range entirely is a precondition failure.
    const json range_payload = invoke_expect_payload(tools, "get_scalar_range", json::object());
    const double range_lo = payload_number(range_payload, "lo", "get_scalar_range");
    const double range_hi = payload_number(range_payload, "hi", "get_scalar_range");

    std::vector<GoalBand> bands = goal.bands;
    for (auto& band : bands) {
        if (!(band.lo < band.hi))
            throw GoalError("goal band [" + format_double(band.lo) + ", " +
                            format_double(band.hi) + "] is empty");
        if (band.hi <= range_lo || band.lo >= range_hi)
            throw GoalError("goal band [" + format_double(band.lo) + ", " +
                            format_double(band.hi) + "] lies outside the scalar range [" +
                            format_double(range_lo) + ", " + format_double(range_hi) + "]");
        band.lo = std::max(band.lo, range_lo);
        band.hi = std::min(band.hi, range_hi);
    }
    std::vector<GoalBand> sorted = bands;
    std::sort(sorted.begin(), sorted.end(),
              [](const GoalBand& a, const GoalBand& b) { return a.lo < b.lo; });
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
        if (sorted[i + 1].lo < sorted[i].hi)
            throw GoalError("goal bands overlap around scalar " + format_double(sorted[i].hi));

    TfRefineResult out;
    // The controller's working color points, one per goal band at the band's
    // midpoint scalar. Bands enter the list the first time they violate.
    std::vector<std::optional<std::array<double, 3>>> points(bands.size());

    auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };

    for (int iter = 0; iter < goal.max_iters; ++iter) {
        const ToolResult shot = tools("take_screenshot", json::object());
        if (shot.is_error)
            throw GoalError("take_screenshot failed: " + shot.first_text());

        const auto measured = evaluator(shot, bands);
        if (measured.size() != bands.size())
            throw GoalError("evaluator returned " + std::to_string(measured.size()) +
                            " measurements for " + std::to_string(bands.size()) + " bands");

        double error = 0.0;
        json measurement = json::array();
        for (std::size_t i = 0; i < bands.size(); ++i) {
            for (int c = 0; c < 3; ++c)
                error = std::max(error, std::abs(measured[i][c] - bands[i].target[c]));
            measurement.push_back({{"lo", bands[i].lo},
                                   {"hi", bands[i].hi},
                                   {"measured", {measured[i][0], measured[i][1], measured[i][2]}},
                                   {"target", {bands[i].target[0], bands[i].target[1],
                                               bands[i].target[2]}}});
        }

        IterationRecord record;
        record.candidate = {{"color_points", color_points_json(out.tf.color_points)}};
        record.measurement = measurement;
        record.error = error;
        out.trace.iterations.push_back(record);

        if (error <= goal.color_tol) {
            out.trace.converged = true;
            out.trace.final_params = record.candidate;
            return out;
        }

        // Damped update: move each violating band's point halfway toward its
        // target, seeding from the measured color on first touch.
        for (std::size_t i = 0; i < bands.size(); ++i) {
            double band_error = 0.0;
            for (int c = 0; c < 3; ++c)
                band_error = std::max(band_error, std::abs(measured[i][c] - bands[i].target[c]));
            if (band_error <= goal.color_tol)
                continue;
            const std::array<double, 3> base = points[i] ? *points[i] : measured[i];
            points[i] = {clamp01(base[0] + 0.5 * (bands[i].target[0] - base[0])),
                         clamp01(base[1] + 0.5 * (bands[i].target[1] - base[1])),
                         clamp01(base[2] + 0.5 * (bands[i].target[2] - base[2]))};
        }

        std::vector<ColorPoint> list;
        for (std::size_t i = 0; i < bands.size(); ++i) {
            if (!points[i])
                continue;
            const double mid = 0.5 * (bands[i].lo + bands[i].hi);
            list.push_back({mid, (*points[i])[0], (*points[i])[1], (*points[i])[2]});
        }
        std::sort(list.begin(), list.end(),
                  [](const ColorPoint& a, const ColorPoint& b) { return a.scalar < b.scalar; });
        if (list.size() == 1) {
            // A single band still needs two control points; pin the band's
            // edges to its color.
            const auto& only = list.front();
            const std::size_t band_index = static_cast<std::size_t>(
                std::find_if(points.begin(), points.end(),
                             [](const auto& p) { return p.has_value(); }) -
                points.begin());
            list = {{bands[band_index].lo, only.r, only.g, only.b},
                    {bands[band_index].hi, only.r, only.g, only.b}};
        }

        json wire_points = json::array();
        for (const auto& p : list)
            wire_points.push_back({p.scalar, p.r, p.g, p.b});
        const ToolResult applied = tools("set_color_map", {{"points", wire_points}});
        if (applied.is_error)
            throw GoalError("set_color_map failed: " + applied.first_text());
        const auto payload = applied.payload();
        if (payload && payload->contains("transfer_function"))
            out.tf = TransferFunction::from_json((*payload)["transfer_function"]);
        else
            out.tf.color_points = list;
    }

    out.trace.converged = false;
    out.trace.final_params = {{"color_points", color_points_json(out.tf.color_points)}};
    return out;
}

} // namespace vizbridge
