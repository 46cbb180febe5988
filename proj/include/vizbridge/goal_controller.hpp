#pragma once

#include "vizbridge/engine.hpp"
#include "vizbridge/tool_result.hpp"

#include <array>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vizbridge {

/// Controllers drive the engine exclusively through the public tool surface,
/// so every probe they make lands in the session log like any agent action.
using ToolInvoker = std::function<ToolResult(const std::string& tool, const json& arguments)>;

class GoalError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Target: a contour whose surface area is target_fraction of reference_area.
struct AreaGoal {
    SourceId contour_id;
    double reference_area = 0.0;
    double target_fraction = 0.5;  // in (0, 1]
    double rel_tol = 0.01;
    int max_iters = 30;            // total area-evaluation budget
    /// Search interval; defaults to the parent reader's scalar range.
    /// Probes that fail (no closed-form area) are tolerated and skipped
    /// when looking for a bracket.
    std::optional<ScalarRange> search_range;
};

struct GoalBand {
    double lo = 0.0;
    double hi = 0.0;
    std::array<double, 3> target{0.0, 0.0, 0.0};
};

/// Target: per-band colors for the active volume rendering.
struct BandColorGoal {
    std::vector<GoalBand> bands;
    double color_tol = 0.05;  // max per-channel deviation
    int max_iters = 10;       // render/measure cycles
};

struct IterationRecord {
    json candidate;       // params in effect during this measurement
    json measurement;     // what the tool path reported
    double error = 0.0;   // objective error (relative for area, per-channel for color)
    bool measurement_failed = false;

    json to_json() const;
};

struct RefinementTrace {
    std::vector<IterationRecord> iterations;
    bool converged = false;
    json final_params;

    json to_json() const;
};

struct AreaSolveResult {
    double isovalue = 0.0;
    RefinementTrace trace;
};

/// Scan-then-bisect search for the isovalue meeting an AreaGoal. Phase 1
/// evaluates the area at 16 evenly spaced values across the search range to
/// find a bracketing pair around the target; phase 2 bisects inside the
/// bracket. Every evaluation goes through update_isosurface +
/// get_surface_area and is recorded in the trace.
///
/// Throws GoalError when no bracketing pair exists ("target unattainable",
/// with the scanned value/area table) or when the bracket turns out to be
/// non-monotone. Exhausting max_iters returns converged=false.
AreaSolveResult solve_iso_area(const AreaGoal& goal, const ToolInvoker& tools);

/// Maps a screenshot result to one measured color per goal band. The default
/// reads the mock band_report; a vision-model evaluator is a drop-in
/// substitute. Must throw GoalError when it cannot measure.
using BandEvaluator = std::function<std::vector<std::array<double, 3>>(
    const ToolResult& screenshot, const std::vector<GoalBand>& bands)>;

/// Default evaluator: each goal band takes the color of the report band
/// containing its midpoint scalar.
BandEvaluator band_report_evaluator();

struct TfRefineResult {
    /// Transfer function after the last applied update. When the goal was
    /// already satisfied and nothing was applied, the point lists are empty.
    TransferFunction tf;
    RefinementTrace trace;
};

/// Render-measure-update loop for a BandColorGoal. Each iteration takes a
/// screenshot, measures every goal band, and, for each violating band,
/// moves the color point at the band's midpoint halfway toward the target
/// (inserting it at first). The controller owns the full color-point list
/// and replaces it atomically via set_color_map; damped half steps avoid
/// oscillating between wrong color maps.
TfRefineResult refine_transfer_function(const BandColorGoal& goal, const ToolInvoker& tools,
                                        const BandEvaluator& evaluator = band_report_evaluator());

} // namespace vizbridge
