#include "vizbridge/paraview_adapter.hpp"

#include "vizbridge/base64.hpp"

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace vizbridge::paraview {

namespace {

std::string py_string(const std::string& s)
{
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
        case '\\': out += "\\\\"; break;
        case '"': out += "\\\""; break;
        case '\n': out += "\\n"; break;
        default: out += c; break;
        }
    }
    out += "\"";
    return out;
}

std::string py_number(double v)
{
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

std::string bootstrap_script(const std::string& host, int port)
{
    std::ostringstream s;
    s << "import sys, base64, json\n"
      << "from paraview.simple import *\n"
      << "Connect(" << py_string(host) << ", " << port << ")\n"
      << "print(json.dumps({\"ok\": True, \"event\": \"connected\"}), flush=True)\n"
      << "for _line in sys.stdin:\n"
      << "    _line = _line.strip()\n"
      << "    if not _line:\n"
      << "        continue\n"
      << "    try:\n"
      << "        exec(compile(base64.b64decode(_line).decode(\"utf-8\"), \"<vizbridge>\", "
         "\"exec\"))\n"
      << "    except Exception as _e:\n"
      << "        print(json.dumps({\"ok\": False, \"error\": str(_e)}), flush=True)\n";
    return s.str();
}

// ---------------------------------------------------------------------------
// Snippet builders
// ---------------------------------------------------------------------------

std::string script_load(const std::string& var, const std::string& path)
{
    std::ostringstream s;
    s << var << " = OpenDataFile(" << py_string(path) << ")\n"
      << "if " << var << " is None:\n"
      << "    print(json.dumps({\"ok\": False, \"error\": \"cannot read dataset\"}), "
         "flush=True)\n"
      << "else:\n"
      << "    " << var << ".UpdatePipeline()\n"
      << "    _arr = " << var << ".PointData[0]\n"
      << "    print(json.dumps({\"ok\": True, \"array\": _arr.Name, "
         "\"range\": list(_arr.GetRange())}), flush=True)\n";
    return s.str();
}

std::string script_contour(const std::string& var, const std::string& parent_var, double value)
{
    std::ostringstream s;
    s << var << " = Contour(Input=" << parent_var << ")\n"
      << var << ".Isosurfaces = [" << py_number(value) << "]\n"
      << "Show(" << var << ")\n"
      << "Render()\n"
      << "print(json.dumps({\"ok\": True}), flush=True)\n";
    return s.str();
}

std::string script_set_contour_value(const std::string& var, double value)
{
    std::ostringstream s;
    s << var << ".Isosurfaces = [" << py_number(value) << "]\n"
      << var << ".UpdatePipeline()\n"
      << "Render()\n"
      << "print(json.dumps({\"ok\": True}), flush=True)\n";
    return s.str();
}

std::string script_surface_area(const std::string& var)
{
    // The conventional route: an integrate-variables filter fetched to the
    // client; cell data "Area" holds the integrated surface area.
    std::ostringstream s;
    s << "_integ = IntegrateVariables(Input=" << var << ")\n"
      << "_data = servermanager.Fetch(_integ)\n"
      << "_area = _data.GetCellData().GetArray(\"Area\")\n"
      << "Delete(_integ)\n"
      << "if _area is None:\n"
      << "    print(json.dumps({\"ok\": False, \"error\": \"no Area array; source is not a "
         "surface\"}), flush=True)\n"
      << "else:\n"
      << "    print(json.dumps({\"ok\": True, \"area\": _area.GetValue(0)}), flush=True)\n";
    return s.str();
}

std::string script_scalar_range(const std::string& var)
{
    std::ostringstream s;
    s << var << ".UpdatePipeline()\n"
      << "_arr = " << var << ".PointData[0]\n"
      << "print(json.dumps({\"ok\": True, \"range\": list(_arr.GetRange())}), flush=True)\n";
    return s.str();
}

std::string script_histogram(const std::string& var, int bins)
{
    std::ostringstream s;
    s << "from paraview.vtk.util.numpy_support import vtk_to_numpy\n"
      << "import numpy as _np\n"
      << var << ".UpdatePipeline()\n"
      << "_data = servermanager.Fetch(" << var << ")\n"
      << "_vals = vtk_to_numpy(_data.GetPointData().GetArray(0))\n"
      << "_counts, _edges = _np.histogram(_vals, bins=" << bins << ")\n"
      << "print(json.dumps({\"ok\": True, \"counts\": _counts.tolist(), "
         "\"edges\": _edges.tolist()}), flush=True)\n";
    return s.str();
}

std::string script_enable_volume(const std::string& var, const std::string& reader_var)
{
    std::ostringstream s;
    s << var << " = Show(" << reader_var << ")\n"
      << var << ".Representation = \"Volume\"\n"
      << "_arr = " << reader_var << ".PointData[0]\n"
      << "ColorBy(" << var << ", (\"POINTS\", _arr.Name))\n"
      << "Render()\n"
      << "print(json.dumps({\"ok\": True, \"array\": _arr.Name}), flush=True)\n";
    return s.str();
}

std::string script_set_transfer_function(const std::string& reader_var,
                                         const TransferFunction& tf)
{
    std::ostringstream s;
    s << "_arr = " << reader_var << ".PointData[0]\n"
      << "_ctf = GetColorTransferFunction(_arr.Name)\n"
      << "_otf = GetOpacityTransferFunction(_arr.Name)\n";
    s << "_ctf.RGBPoints = [";
    for (std::size_t i = 0; i < tf.color_points.size(); ++i) {
        const auto& p = tf.color_points[i];
        s << (i ? ", " : "") << py_number(p.scalar) << ", " << py_number(p.r) << ", "
          << py_number(p.g) << ", " << py_number(p.b);
    }
    s << "]\n";
    s << "_otf.Points = [";
    for (std::size_t i = 0; i < tf.opacity_points.size(); ++i) {
        const auto& p = tf.opacity_points[i];
        s << (i ? ", " : "") << py_number(p.scalar) << ", " << py_number(p.alpha)
          << ", 0.5, 0.0";
    }
    s << "]\n"
      << "Render()\n"
      << "print(json.dumps({\"ok\": True}), flush=True)\n";
    return s.str();
}

std::string script_screenshot(const std::string& path)
{
    std::ostringstream s;
    s << "SaveScreenshot(" << py_string(path) << ")\n"
      << "print(json.dumps({\"ok\": True, \"path\": " << py_string(path) << "}), flush=True)\n";
    return s.str();
}

std::string script_reset_camera()
{
    return "ResetCamera()\nRender()\nprint(json.dumps({\"ok\": True}), flush=True)\n";
}

std::string script_orbit(double azimuth_deg, double elevation_deg)
{
    std::ostringstream s;
    s << "_cam = GetActiveCamera()\n"
      << "_cam.Azimuth(" << py_number(azimuth_deg) << ")\n"
      << "_cam.Elevation(" << py_number(elevation_deg) << ")\n"
      << "Render()\n"
      << "print(json.dumps({\"ok\": True}), flush=True)\n";
    return s.str();
}

std::string script_delete(const std::string& var)
{
    std::ostringstream s;
    s << "Delete(" << var << ")\n"
      << "del " << var << "\n"
      << "print(json.dumps({\"ok\": True}), flush=True)\n";
    return s.str();
}

std::string script_set_visibility(const std::string& var, bool visible)
{
    std::ostringstream s;
    s << (visible ? "Show(" : "Hide(") << var << ")\n"
      << "Render()\n"
      << "print(json.dumps({\"ok\": True}), flush=True)\n";
    return s.str();
}

// ---------------------------------------------------------------------------
// PvPythonChannel
// ---------------------------------------------------------------------------

PvPythonChannel::PvPythonChannel(const std::string& host, int port,
                                 const std::string& pvpython_executable)
{
    const std::string bootstrap = bootstrap_script(host, port);
    char script_path[] = "/tmp/vizbridge-pv-XXXXXX";
    const int script_fd = ::mkstemp(script_path);
    if (script_fd < 0)
        throw EngineError("cannot create pvpython bootstrap file");
    {
        std::ofstream out(script_path);
        out << bootstrap;
    }
    ::close(script_fd);

    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
        throw EngineError("cannot create pipes for pvpython");

    const pid_t pid = ::fork();
    if (pid < 0)
        throw EngineError("cannot fork pvpython helper");
    if (pid == 0) {
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        ::close(to_child[0]);
        ::close(to_child[1]);
        ::close(from_child[0]);
        ::close(from_child[1]);
        ::execlp(pvpython_executable.c_str(), pvpython_executable.c_str(), script_path,
                 static_cast<char*>(nullptr));
        std::_Exit(127);
    }

    ::close(to_child[0]);
    ::close(from_child[1]);
    to_child_ = to_child[1];
    from_child_ = from_child[0];
    pid_ = pid;

    // Wait for the connection handshake so configuration errors surface at
    // startup rather than on the first tool call.
    const std::string line = read_line();
    const json reply = json::parse(line, nullptr, false);
    if (reply.is_discarded() || reply.value("ok", false) != true)
        throw EngineError("pvpython helper failed to connect to pvserver at " + host + ":" +
                          std::to_string(port) + (line.empty() ? "" : (": " + line)));
}

PvPythonChannel::~PvPythonChannel()
{
    if (to_child_ >= 0)
        ::close(to_child_);
    if (from_child_ >= 0)
        ::close(from_child_);
    if (pid_ > 0) {
        ::kill(static_cast<pid_t>(pid_), SIGTERM);
        int status = 0;
        ::waitpid(static_cast<pid_t>(pid_), &status, 0);
    }
}

std::string PvPythonChannel::read_line()
{
    for (;;) {
        const auto nl = read_buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = read_buffer_.substr(0, nl);
            read_buffer_.erase(0, nl + 1);
            return line;
        }
        char chunk[4096];
        const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
        if (n <= 0)
            throw EngineError("pvpython helper closed the connection");
        read_buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

json PvPythonChannel::roundtrip(const std::string& python_snippet)
{
    const std::string framed =
        base64_encode(std::vector<std::uint8_t>(python_snippet.begin(), python_snippet.end())) +
        "\n";
    std::size_t written = 0;
    while (written < framed.size()) {
        const ssize_t n = ::write(to_child_, framed.data() + written, framed.size() - written);
        if (n <= 0)
            throw EngineError("cannot write to pvpython helper");
        written += static_cast<std::size_t>(n);
    }
    const std::string line = read_line();
    const json reply = json::parse(line, nullptr, false);
    if (reply.is_discarded())
        throw EngineError("pvpython helper produced a non-JSON reply: " + line);
    return reply;
}

// ---------------------------------------------------------------------------
// ParaViewEngine
// ---------------------------------------------------------------------------

ParaViewEngine::ParaViewEngine(std::unique_ptr<CommandChannel> channel,
                               std::filesystem::path scratch_dir)
    : channel_(std::move(channel)), scratch_dir_(std::move(scratch_dir))
{
}

json ParaViewEngine::run(const std::string& snippet) const
{
    const json reply = channel_->roundtrip(snippet);
    if (reply.value("ok", false) != true)
        throw EngineError("paraview: " + reply.value("error", "unknown failure"));
    return reply;
}

std::string ParaViewEngine::unique_name(const std::string& base)
{
    return base + "-" + std::to_string(++name_counters_[base]);
}

const ParaViewEngine::Source& ParaViewEngine::find(const SourceId& id) const
{
    for (const auto& s : sources_)
        if (s.info.id == id)
            return s;
    throw EngineError("unknown source id '" + id + "'");
}

ParaViewEngine::Source& ParaViewEngine::find(const SourceId& id)
{
    return const_cast<Source&>(static_cast<const ParaViewEngine*>(this)->find(id));
}

const ParaViewEngine::Source& ParaViewEngine::reader_ancestor(const SourceId& id) const
{
    const Source* node = &find(id);
    while (node->info.kind != SourceKind::reader) {
        if (!node->info.parent_id)
            throw EngineError("source '" + node->info.name + "' has no reader ancestor");
        node = &find(*node->info.parent_id);
    }
    return *node;
}

PipelineSource ParaViewEngine::load_dataset(const std::string& path_or_spec)
{
    Source src;
    src.info.id = "src-" + std::to_string(next_id_++);
    src.var = "src_" + std::to_string(next_id_ - 1);

    const std::string stem = std::filesystem::path(path_or_spec).stem().string();
    src.info.name = unique_name(stem.empty() ? "dataset" : stem);
    src.info.kind = SourceKind::reader;
    src.info.params = {{"path", path_or_spec}};

    run(script_load(src.var, path_or_spec));
    sources_.push_back(std::move(src));
    return sources_.back().info;
}

std::vector<PipelineSource> ParaViewEngine::list_sources(std::optional<SourceKind> kind,
                                                         std::string_view name_substring) const
{
    std::vector<PipelineSource> out;
    for (const auto& s : sources_) {
        if (kind && s.info.kind != *kind)
            continue;
        if (!name_substring.empty()) {
            const auto lower = [](std::string v) {
                std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) {
                    return static_cast<char>(std::tolower(c));
                });
                return v;
            };
            if (lower(s.info.name).find(lower(std::string(name_substring))) == std::string::npos)
                continue;
        }
        out.push_back(s.info);
    }
    return out;
}

PipelineSource ParaViewEngine::get_source(const SourceId& id) const
{
    return find(id).info;
}

PipelineSource ParaViewEngine::create_contour(const SourceId& parent, double value)
{
    const Source& p = find(parent);
    if (p.info.kind != SourceKind::reader)
        throw EngineError("cannot contour '" + p.info.name + "': contours apply to readers only");
    const ScalarRange range = scalar_range(parent);
    if (!std::isfinite(value) || value <= range.lo || value >= range.hi)
        throw EngineError("contour value " + format_double(value) + " outside valid range (" +
                          format_double(range.lo) + ", " + format_double(range.hi) + ")");

    Source src;
    src.info.id = "src-" + std::to_string(next_id_++);
    src.var = "src_" + std::to_string(next_id_ - 1);
    src.info.name = unique_name("isosurface");
    src.info.kind = SourceKind::contour;
    src.info.params = {{"value", value}};
    src.info.parent_id = p.info.id;

    run(script_contour(src.var, p.var, value));
    sources_.push_back(std::move(src));
    return sources_.back().info;
}

PipelineSource ParaViewEngine::set_contour_value(const SourceId& id, double value)
{
    Source& s = find(id);
    if (s.info.kind != SourceKind::contour)
        throw EngineError("'" + s.info.name + "' is not a contour");
    const ScalarRange range = scalar_range(id);
    if (!std::isfinite(value) || value <= range.lo || value >= range.hi)
        throw EngineError("contour value " + format_double(value) + " outside valid range (" +
                          format_double(range.lo) + ", " + format_double(range.hi) + ")");
    run(script_set_contour_value(s.var, value));
    s.info.params["value"] = value;
    return s.info;
}

double ParaViewEngine::surface_area(const SourceId& id) const
{
    const Source& s = find(id);
    if (s.info.kind != SourceKind::contour)
        throw EngineError("'" + s.info.name + "' is not a contour; surface area requires one");
    const json reply = run(script_surface_area(s.var));
    return reply.at("area").get<double>();
}

ScalarRange ParaViewEngine::scalar_range(const SourceId& id) const
{
    const Source& reader = reader_ancestor(id);
    const json reply = run(script_scalar_range(reader.var));
    return {reply.at("range").at(0).get<double>(), reply.at("range").at(1).get<double>()};
}

std::vector<HistogramBin> ParaViewEngine::histogram(const SourceId& id, int bins) const
{
    if (bins < 1)
        throw EngineError("histogram requires bins >= 1");
    const Source& reader = reader_ancestor(id);
    const json reply = run(script_histogram(reader.var, bins));
    std::vector<HistogramBin> out;
    const auto& counts = reply.at("counts");
    const auto& edges = reply.at("edges");
    for (std::size_t i = 0; i < counts.size(); ++i)
        out.push_back({edges.at(i).get<double>(), edges.at(i + 1).get<double>(),
                       counts.at(i).get<std::int64_t>()});
    return out;
}

PipelineSource ParaViewEngine::enable_volume_rendering(const SourceId& reader)
{
    const Source& r = find(reader);
    if (r.info.kind != SourceKind::reader)
        throw EngineError("volume rendering applies to readers only, and '" + r.info.name +
                          "' is a " + std::string(to_string(r.info.kind)));
    for (const auto& s : sources_)
        if (s.info.kind == SourceKind::volume_repr && s.info.parent_id == r.info.id)
            throw EngineError("volume representation already exists for '" + r.info.name + "'");

    Source src;
    src.info.id = "src-" + std::to_string(next_id_++);
    src.var = "src_" + std::to_string(next_id_ - 1);
    src.info.name = unique_name("volume");
    src.info.kind = SourceKind::volume_repr;
    src.info.parent_id = r.info.id;
    src.tf = default_transfer_function(scalar_range(reader));

    run(script_enable_volume(src.var, r.var));
    sources_.push_back(std::move(src));
    return sources_.back().info;
}

void ParaViewEngine::set_transfer_function(const SourceId& volume, const TransferFunction& tf)
{
    Source& s = find(volume);
    if (s.info.kind != SourceKind::volume_repr)
        throw EngineError("'" + s.info.name + "' is not a volume representation");
    validate_transfer_function(tf, scalar_range(volume));
    run(script_set_transfer_function(reader_ancestor(volume).var, tf));
    s.tf = tf;
}

TransferFunction ParaViewEngine::transfer_function(const SourceId& volume) const
{
    const Source& s = find(volume);
    if (s.info.kind != SourceKind::volume_repr)
        throw EngineError("'" + s.info.name + "' is not a volume representation");
    return s.tf;
}

RenderCapture ParaViewEngine::render()
{
    const auto path = scratch_dir_ / ("vizbridge-shot-" + std::to_string(++shot_counter_) +
                                      ".png");
    run(script_screenshot(path.string()));

    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw EngineError("paraview screenshot missing at " + path.string());
    RenderCapture capture;
    capture.png.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    capture.width = 0;   // dimensions live in the PNG header
    capture.height = 0;
    return capture;
}

void ParaViewEngine::reset_camera()
{
    run(script_reset_camera());
    camera_ = CameraState{};
}

CameraState ParaViewEngine::orbit(double azimuth_deg, double elevation_deg)
{
    run(script_orbit(azimuth_deg, elevation_deg));
    double az = std::fmod(camera_.azimuth_deg + azimuth_deg, 360.0);
    if (az < 0.0)
        az += 360.0;
    camera_.azimuth_deg = az;
    camera_.elevation_deg = std::clamp(camera_.elevation_deg + elevation_deg, -90.0, 90.0);
    return camera_;
}

CameraState ParaViewEngine::camera() const
{
    return camera_;
}

void ParaViewEngine::delete_source(const SourceId& id)
{
    const Source& victim = find(id);
    std::vector<std::string> children;
    for (const auto& s : sources_)
        if (s.info.parent_id == victim.info.id)
            children.push_back(s.info.name + " (" + s.info.id + ")");
    if (!children.empty()) {
        std::string msg = "cannot delete '" + victim.info.name + "': dependent sources exist:";
        for (const auto& c : children)
            msg += " " + c;
        throw EngineError(msg);
    }
    run(script_delete(victim.var));
    sources_.erase(std::find_if(sources_.begin(), sources_.end(),
                                [&](const Source& s) { return s.info.id == id; }));
}

void ParaViewEngine::set_visibility(const SourceId& id, bool visible)
{
    Source& s = find(id);
    run(script_set_visibility(s.var, visible));
    s.info.visible = visible;
}

} // namespace vizbridge::paraview
