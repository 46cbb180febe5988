#pragma once

#include "vizbridge/json_util.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vizbridge {

/// Raised by engine operations for anything the caller can act on:
/// bad values, applicability violations, unknown ids. The message is
/// agent-facing and should name the valid alternative where one exists.
class EngineError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class SourceKind { reader, contour, volume_repr };

std::string_view to_string(SourceKind kind);
std::optional<SourceKind> source_kind_from_string(std::string_view text);

using SourceId = std::string;

/// One node of the visualization pipeline.
struct PipelineSource {
    SourceId id;
    std::string name;
    SourceKind kind = SourceKind::reader;
    json params = json::object();
    std::optional<SourceId> parent_id;
    bool visible = true;

    json to_json() const;
};

struct ScalarRange {
    double lo = 0.0;
    double hi = 0.0;
};

struct ColorPoint {
    double scalar, r, g, b;
    bool operator==(const ColorPoint&) const = default;
};

struct OpacityPoint {
    double scalar, alpha;
    bool operator==(const OpacityPoint&) const = default;
};

/// Color and opacity control points over a scalar range. Scalar coordinates
/// are strictly increasing within each list; evaluation clamps outside the
/// covered interval.
struct TransferFunction {
    std::vector<ColorPoint> color_points;
    std::vector<OpacityPoint> opacity_points;

    std::array<double, 3> color_at(double scalar) const;
    double opacity_at(double scalar) const;

    json to_json() const;
    static TransferFunction from_json(const json& j);
    bool operator==(const TransferFunction&) const = default;
};

/// Per-band row of the mock renderer's report: the transfer-function color
/// and opacity evaluated at the band's midpoint scalar (exact, unquantized).
struct BandColor {
    double lo, hi;
    double r, g, b;
    double alpha;
};

struct RenderCapture {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> png;
    std::optional<std::vector<BandColor>> band_report;  // mock backend only
};

struct HistogramBin {
    double lo, hi;
    std::int64_t count;
};

struct CameraState {
    double azimuth_deg = 0.0;
    double elevation_deg = 0.0;
    bool operator==(const CameraState&) const = default;
};

/// The engine contract: every pipeline mutation and query the tool layer may
/// perform. Implementations are MockEngine (deterministic analytic fields)
/// and the ParaView adapter (paraview.simple over a pvserver connection).
/// All calls are serialized by the single-threaded server loop; engines are
/// not required to be thread-safe.
class Engine {
public:
    virtual ~Engine() = default;

    /// Registers a new reader source. Accepts a dataset path or, on the mock
    /// backend, an inline/field-spec JSON document.
    virtual PipelineSource load_dataset(const std::string& path_or_spec) = 0;

    /// All sources matching the filter, in creation order.
    virtual std::vector<PipelineSource>
    list_sources(std::optional<SourceKind> kind = std::nullopt,
                 std::string_view name_substring = {}) const = 0;

    virtual PipelineSource get_source(const SourceId& id) const = 0;

    virtual PipelineSource create_contour(const SourceId& parent, double value) = 0;
    virtual PipelineSource set_contour_value(const SourceId& id, double value) = 0;

    /// Surface area of a contour in squared domain units.
    virtual double surface_area(const SourceId& id) const = 0;

    /// Exact field min/max for the reader ancestor of `id`.
    virtual ScalarRange scalar_range(const SourceId& id) const = 0;

    /// Histogram over a fixed deterministic sample grid; bins partition
    /// the scalar range.
    virtual std::vector<HistogramBin> histogram(const SourceId& id, int bins) const = 0;

    /// Creates the volume representation for a reader with a default
    /// transfer function spanning its scalar range. At most one per reader.
    virtual PipelineSource enable_volume_rendering(const SourceId& reader) = 0;

    /// Replaces the entire transfer function atomically.
    virtual void set_transfer_function(const SourceId& volume, const TransferFunction& tf) = 0;
    virtual TransferFunction transfer_function(const SourceId& volume) const = 0;

    virtual RenderCapture render() = 0;

    virtual void reset_camera() = 0;
    virtual CameraState orbit(double azimuth_deg, double elevation_deg) = 0;
    virtual CameraState camera() const = 0;

    /// Rejects deletion while dependent sources exist. Ids are never reused.
    virtual void delete_source(const SourceId& id) = 0;
    virtual void set_visibility(const SourceId& id, bool visible) = 0;
};

/// Validates the TransferFunction invariants against a scalar range and
/// throws EngineError naming the first offending point. Scalar coordinates
/// may exceed the range by at most 1% of its span (agents routinely pass
/// display-rounded endpoints); evaluation clamps regardless.
void validate_transfer_function(const TransferFunction& tf, const ScalarRange& range);

/// The transfer function enable_volume_rendering starts from: a two-point
/// blue-to-red ramp across the scalar range with linear 0-to-1 opacity.
TransferFunction default_transfer_function(const ScalarRange& range);

} // namespace vizbridge
