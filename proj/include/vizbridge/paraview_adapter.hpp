#pragma once

#include "vizbridge/engine.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace vizbridge::paraview {

/// Transport to a Python helper connected to a pvserver. Each call ships one
/// Python snippet; the snippet prints exactly one JSON reply line
/// ({"ok": true, ...} or {"ok": false, "error": ...}).
class CommandChannel {
public:
    virtual ~CommandChannel() = default;
    virtual json roundtrip(const std::string& python_snippet) = 0;
};

/// Launches `pvpython` with a bootstrap that connects to the pvserver in
/// multi-client mode and executes base64-framed snippets from stdin.
/// Construction fails with EngineError when pvpython cannot be spawned or
/// the connection handshake does not arrive.
class PvPythonChannel : public CommandChannel {
public:
    PvPythonChannel(const std::string& host, int port,
                    const std::string& pvpython_executable = "pvpython");
    ~PvPythonChannel() override;

    PvPythonChannel(const PvPythonChannel&) = delete;
    PvPythonChannel& operator=(const PvPythonChannel&) = delete;

    json roundtrip(const std::string& python_snippet) override;

private:
    int to_child_ = -1;
    int from_child_ = -1;
    long pid_ = -1;
    std::string read_buffer_;

    std::string read_line();
};

/// The Python bootstrap fed to pvpython (exposed for tests).
std::string bootstrap_script(const std::string& host, int port);

/// Snippet builders: the op -> paraview.simple mapping. Pure string
/// construction, unit-testable without ParaView. `var` names the Python-side
/// proxy variable for a source.
std::string script_load(const std::string& var, const std::string& path);
std::string script_contour(const std::string& var, const std::string& parent_var, double value);
std::string script_set_contour_value(const std::string& var, double value);
std::string script_surface_area(const std::string& var);
std::string script_scalar_range(const std::string& var);
std::string script_histogram(const std::string& var, int bins);
std::string script_enable_volume(const std::string& var, const std::string& reader_var);
std::string script_set_transfer_function(const std::string& reader_var,
                                         const TransferFunction& tf);
std::string script_screenshot(const std::string& path);
std::string script_reset_camera();
std::string script_orbit(double azimuth_deg, double elevation_deg);
std::string script_delete(const std::string& var);
std::string script_set_visibility(const std::string& var, bool visible);

/// Engine backed by a live ParaView session. Mirrors the pipeline locally
/// (id, name, kind, parent) and forwards every operation to paraview.simple
/// through the channel. Render captures carry no band_report; visual
/// judgment on this backend belongs to the MLLM client.
class ParaViewEngine : public Engine {
public:
    explicit ParaViewEngine(std::unique_ptr<CommandChannel> channel,
                            std::filesystem::path scratch_dir = "/tmp");

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
        std::string var;              // Python-side proxy variable
        TransferFunction tf;          // volume representations
    };

    const Source& find(const SourceId& id) const;
    Source& find(const SourceId& id);
    const Source& reader_ancestor(const SourceId& id) const;
    json run(const std::string& snippet) const;  // throws EngineError on {"ok": false}
    std::string unique_name(const std::string& base);

    std::unique_ptr<CommandChannel> channel_;
    std::filesystem::path scratch_dir_;
    std::vector<Source> sources_;
    std::map<std::string, int> name_counters_;
    int next_id_ = 1;
    int shot_counter_ = 0;
    CameraState camera_{};
};

} // namespace vizbridge::paraview
