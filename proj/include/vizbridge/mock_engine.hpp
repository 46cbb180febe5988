#pragma once

#include "vizbridge/engine.hpp"

#include <map>
#include <string>
#include <vector>

namespace vizbridge {

enum class FieldFamily { radial, linear_x, shells };

/// Analytic scalar field over the unit cube [0,1]^3. Stands in for the CT
/// volumes the real backend reads; every derived quantity (range, area,
/// histogram) has a closed form or a fixed deterministic sampling rule.
struct FieldSpec {
    FieldFamily family = FieldFamily::radial;
    std::array<double, 3> center{0.5, 0.5, 0.5};  // radial/shells only
    double shell_period = 0.25;                   // shells only

    double value_at(double x, double y, double z) const;
    ScalarRange range() const;

    /// Largest sphere radius around `center` still inside the cube; the
    /// analytic sphere-area formula holds up to this radius.
    double fit_radius() const;
    double max_radius() const;  // farthest corner distance

    std::string base_name() const;

    json to_json() const;
    /// Throws EngineError on unknown family or malformed fields.
    static FieldSpec from_json(const json& j);
};

/// Deterministic in-memory backend. Sources live in creation order, ids are
/// monotonic and never reused, and render output is a stripe visualization
/// of the active transfer function (byte-identical for identical state).
class MockEngine : public Engine {
public:
    static constexpr int kHistogramLattice = 64;  // cell-centered samples per axis
    static constexpr int kRenderWidth = 256;
    static constexpr int kRenderHeight = 256;
    static constexpr int kRenderBands = 8;

    PipelineSource load_dataset(const std::string& path_or_spec) override;
    std::vector<PipelineSource> list_sources(std::optional<SourceKind> kind,
                                             std::string_view name_substring) const override;
    PipelineSource get_source(const SourceId& id) const override;
    PipelineSource create_contour(const SourceId& parent, double value) override;
    PipelineSource set_contour_value(const SourceId& id, double value) override;
    double surface_area(const SourceId& id) const override;
    ScalarRange scalar_range(const SourceId& id) const override;
    std::vector<HistogramBin> histogram(const SourceId& id, int bins) const override;
    PipelineSource enable_volume_rendering(const SourceId& reader) override;
    void set_transfer_function(const SourceId& volume, const TransferFunction& tf) override;
    TransferFunction transfer_function(const SourceId& volume) const override;
    RenderCapture render() override;
    void reset_camera() override;
    CameraState orbit(double azimuth_deg, double elevation_deg) override;
    CameraState camera() const override;
    void delete_source(const SourceId& id) override;
    void set_visibility(const SourceId& id, bool visible) override;

private:
    struct Source {
        PipelineSource info;
        FieldSpec field;              // readers
        TransferFunction tf;          // volume representations
    };

    const Source& find(const SourceId& id) const;
    Source& find(const SourceId& id);
    const Source& reader_ancestor(const SourceId& id) const;
    std::string unique_name(const std::string& base);

    std::vector<Source> sources_;
    std::map<std::string, int> name_counters_;
    int next_id_ = 1;
    CameraState camera_{};
};

} // namespace vizbridge
