#include "vizbridge/mock_engine.hpp"

#include "vizbridge/png_codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace vizbridge {

namespace {

std::string family_name(FieldFamily f)
{
    switch (f) {
    case FieldFamily::radial: return "radial";
    case FieldFamily::linear_x: return "linear_x";
    case FieldFamily::shells: return "shells";
    }
    return "field";
}

double clamp01(double v)
{
    return std::clamp(v, 0.0, 1.0);
}

bool contains_ci(std::string_view haystack, std::string_view needle)
{
    if (needle.empty())
        return true;
    const auto lower = [](char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); };
    const auto it = std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end(),
                                [&](char a, char b) { return lower(a) == lower(b); });
    return it != haystack.end();
}

} // namespace

double FieldSpec::value_at(double x, double y, double z) const
{
    switch (family) {
    case FieldFamily::linear_x:
        return x;
    case FieldFamily::radial: {
        const double dx = x - center[0], dy = y - center[1], dz = z - center[2];
        return std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    case FieldFamily::shells: {
        const double dx = x - center[0], dy = y - center[1], dz = z - center[2];
        return std::fmod(std::sqrt(dx * dx + dy * dy + dz * dz), shell_period);
    }
    }
    return 0.0;
}

double FieldSpec::fit_radius() const
{
    double r = center[0];
    r = std::min(r, 1.0 - center[0]);
    r = std::min(r, center[1]);
    r = std::min(r, 1.0 - center[1]);
    r = std::min(r, center[2]);
    r = std::min(r, 1.0 - center[2]);
    return r;
}

double FieldSpec::max_radius() const
{
    double best = 0.0;
    for (int corner = 0; corner < 8; ++corner) {
        const double cx = (corner & 1) ? 1.0 : 0.0;
        const double cy = (corner & 2) ? 1.0 : 0.0;
        const double cz = (corner & 4) ? 1.0 : 0.0;
        const double dx = cx - center[0], dy = cy - center[1], dz = cz - center[2];
        best = std::max(best, std::sqrt(dx * dx + dy * dy + dz * dz));
    }
    return best;
}

ScalarRange FieldSpec::range() const
{
    switch (family) {
    case FieldFamily::linear_x:
        return {0.0, 1.0};
    case FieldFamily::radial: {
        // Min distance is 0 for centers inside the cube; clamp otherwise.
        const double nx = std::clamp(center[0], 0.0, 1.0) - center[0];
        const double ny = std::clamp(center[1], 0.0, 1.0) - center[1];
        const double nz = std::clamp(center[2], 0.0, 1.0) - center[2];
        return {std::sqrt(nx * nx + ny * ny + nz * nz), max_radius()};
    }
    case FieldFamily::shells:
        // fmod sweeps [0, period) once the radius exceeds one period; the
        // reported hi is the supremum.
        return {0.0, std::min(shell_period, max_radius())};
    }
    return {0.0, 0.0};
}

std::string FieldSpec::base_name() const
{
    return family_name(family);
}

json FieldSpec::to_json() const
{
    json j{{"family", family_name(family)}};
    if (family != FieldFamily::linear_x)
        j["center"] = {center[0], center[1], center[2]};
    if (family == FieldFamily::shells)
        j["shell_period"] = shell_period;
    return j;
}

FieldSpec FieldSpec::from_json(const json& j)
{
    if (!j.is_object() || !j.contains("family") || !j["family"].is_string())
        throw EngineError("invalid field spec: expected {\"family\": ...}");
    const std::string family = j["family"].get<std::string>();

    FieldSpec spec;
    if (family == "radial")
        spec.family = FieldFamily::radial;
    else if (family == "linear_x")
        spec.family = FieldFamily::linear_x;
    else if (family == "shells")
        spec.family = FieldFamily::shells;
    else
        throw EngineError("invalid field spec: unknown family '" + family +
                          "' (expected radial, linear_x, or shells)");

    if (j.contains("center")) {
        const auto& c = j["center"];
        if (!c.is_array() || c.size() != 3 || !c[0].is_number() || !c[1].is_number() ||
            !c[2].is_number())
            throw EngineError("invalid field spec: center must be [x, y, z]");
        spec.center = {c[0].get<double>(), c[1].get<double>(), c[2].get<double>()};
        for (double v : spec.center)
            if (v < 0.0 || v > 1.0)
                throw EngineError("invalid field spec: center must lie in the unit cube");
    }
    if (j.contains("shell_period")) {
        if (!j["shell_period"].is_number())
            throw EngineError("invalid field spec: shell_period must be a number");
        spec.shell_period = j["shell_period"].get<double>();
    }
    if (spec.family == FieldFamily::shells &&
        (!(spec.shell_period > 0.0) || !std::isfinite(spec.shell_period)))
        throw EngineError("invalid field spec: shell_period must be > 0");
    return spec;
}

std::string MockEngine::unique_name(const std::string& base)
{
    return base + "-" + std::to_string(++name_counters_[base]);
}

const MockEngine::Source& MockEngine::find(const SourceId& id) const
{
    for (const auto& s : sources_)
        if (s.info.id == id)
            return s;
    throw EngineError("unknown source id '" + id + "'");
}

MockEngine::Source& MockEngine::find(const SourceId& id)
{
    return const_cast<Source&>(static_cast<const MockEngine*>(this)->find(id));
}

const MockEngine::Source& MockEngine::reader_ancestor(const SourceId& id) const
{
    const Source* node = &find(id);
    while (node->info.kind != SourceKind::reader) {
        if (!node->info.parent_id)
            throw EngineError("source '" + node->info.name + "' has no reader ancestor");
        node = &find(*node->info.parent_id);
    }
    return *node;
}

PipelineSource MockEngine::load_dataset(const std::string& path_or_spec)
{
    json spec_json;
    const auto trimmed_start = path_or_spec.find_first_not_of(" \t\r\n");
    if (trimmed_start != std::string::npos && path_or_spec[trimmed_start] == '{') {
        spec_json = json::parse(path_or_spec, nullptr, false);
        if (spec_json.is_discarded())
            throw EngineError("cannot read dataset: inline spec is not valid JSON");
    } else {
        std::ifstream in(path_or_spec);
        if (!in)
            throw EngineError("cannot read dataset '" + path_or_spec + "'");
        std::stringstream buf;
        buf << in.rdbuf();
        spec_json = json::parse(buf.str(), nullptr, false);
        if (spec_json.is_discarded())
            throw EngineError("cannot read dataset '" + path_or_spec +
                              "': not a field-spec JSON document");
    }

    const FieldSpec spec = FieldSpec::from_json(spec_json);

    Source src;
    src.field = spec;
    src.info.id = "src-" + std::to_string(next_id_++);
    src.info.name = unique_name(spec.base_name());
    src.info.kind = SourceKind::reader;
    src.info.params = {{"dataset", spec.to_json()}};
    src.info.visible = true;
    sources_.push_back(std::move(src));
    return sources_.back().info;
}

std::vector<PipelineSource> MockEngine::list_sources(std::optional<SourceKind> kind,
                                                     std::string_view name_substring) const
{
    std::vector<PipelineSource> out;
    for (const auto& s : sources_) {
        if (kind && s.info.kind != *kind)
            continue;
        if (!contains_ci(s.info.name, name_substring))
            continue;
        out.push_back(s.info);
    }
    return out;
}

PipelineSource MockEngine::get_source(const SourceId& id) const
{
    return find(id).info;
}

PipelineSource MockEngine::create_contour(const SourceId& parent, double value)
{
    const Source& p = find(parent);
    if (p.info.kind != SourceKind::reader)
        throw EngineError("cannot contour '" + p.info.name + "': contours apply to readers only");
    const ScalarRange range = p.field.range();
    if (!std::isfinite(value) || value <= range.lo || value >= range.hi)
        throw EngineError("contour value " + format_double(value) +
                          " outside valid range (" + format_double(range.lo) + ", " +
                          format_double(range.hi) + ")");

    Source src;
    src.info.id = "src-" + std::to_string(next_id_++);
    src.info.name = unique_name("isosurface");
    src.info.kind = SourceKind::contour;
    src.info.params = {{"value", value}};
    src.info.parent_id = p.info.id;
    src.info.visible = true;
    sources_.push_back(std::move(src));
    return sources_.back().info;
}

PipelineSource MockEngine::set_contour_value(const SourceId& id, double value)
{
    Source& s = find(id);
    if (s.info.kind != SourceKind::contour)
        throw EngineError("'" + s.info.name + "' is not a contour");
    const ScalarRange range = reader_ancestor(id).field.range();
    if (!std::isfinite(value) || value <= range.lo || value >= range.hi)
        throw EngineError("contour value " + format_double(value) +
                          " outside valid range (" + format_double(range.lo) + ", " +
                          format_double(range.hi) + ")");
    s.info.params["value"] = value;
    return s.info;
}

double MockEngine::surface_area(const SourceId& id) const
{
    const Source& s = find(id);
    if (s.info.kind != SourceKind::contour)
        throw EngineError("'" + s.info.name + "' is not a contour; surface area requires one");
    const Source& reader = reader_ancestor(id);
    const double v = s.info.params.at("value").get<double>();
    const FieldSpec& field = reader.field;

    constexpr double four_pi = 4.0 * std::numbers::pi;
    switch (field.family) {
    case FieldFamily::linear_x:
        return 1.0;  // unit-square plane cross-section
    case FieldFamily::radial: {
        const double fit = field.fit_radius();
        if (v > fit)
            throw EngineError("area undefined for clipped regime: value " + format_double(v) +
                              " exceeds the inscribed radius " + format_double(fit));
        return four_pi * v * v;
    }
    case FieldFamily::shells: {
        // Spheres at radii v, v+T, v+2T, ... that fit entirely in the cube.
        const double fit = field.fit_radius();
        double area = 0.0;
        for (int k = 0;; ++k) {
            const double r = v + k * field.shell_period;
            if (r > fit)
                break;
            area += four_pi * r * r;
        }
        return area;
    }
    }
    return 0.0;
}

ScalarRange MockEngine::scalar_range(const SourceId& id) const
{
    return reader_ancestor(id).field.range();
}

std::vector<HistogramBin> MockEngine::histogram(const SourceId& id, int bins) const
{
    if (bins < 1)
        throw EngineError("histogram requires bins >= 1");
    const Source& reader = reader_ancestor(id);
    const ScalarRange range = reader.field.range();
    const double span = range.hi - range.lo;

    std::vector<std::int64_t> counts(static_cast<std::size_t>(bins), 0);
    const int n = kHistogramLattice;
    for (int i = 0; i < n; ++i) {
        const double x = (i + 0.5) / n;
        for (int j = 0; j < n; ++j) {
            const double y = (j + 0.5) / n;
            for (int k = 0; k < n; ++k) {
                const double z = (k + 0.5) / n;
                const double v = reader.field.value_at(x, y, z);
                int bin = span > 0.0 ? static_cast<int>((v - range.lo) / span * bins) : 0;
                bin = std::clamp(bin, 0, bins - 1);
                ++counts[static_cast<std::size_t>(bin)];
            }
        }
    }

    std::vector<HistogramBin> out;
    out.reserve(static_cast<std::size_t>(bins));
    for (int b = 0; b < bins; ++b)
        out.push_back({range.lo + span * b / bins, range.lo + span * (b + 1) / bins,
                       counts[static_cast<std::size_t>(b)]});
    return out;
}

PipelineSource MockEngine::enable_volume_rendering(const SourceId& reader)
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
    src.info.name = unique_name("volume");
    src.info.kind = SourceKind::volume_repr;
    src.info.parent_id = r.info.id;
    src.info.visible = true;
    src.tf = default_transfer_function(r.field.range());
    src.info.params = json::object();
    sources_.push_back(std::move(src));
    return sources_.back().info;
}

void MockEngine::set_transfer_function(const SourceId& volume, const TransferFunction& tf)
{
    Source& s = find(volume);
    if (s.info.kind != SourceKind::volume_repr)
        throw EngineError("'" + s.info.name + "' is not a volume representation");
    validate_transfer_function(tf, reader_ancestor(volume).field.range());
    s.tf = tf;  // atomic: validated fully before any mutation
}

TransferFunction MockEngine::transfer_function(const SourceId& volume) const
{
    const Source& s = find(volume);
    if (s.info.kind != SourceKind::volume_repr)
        throw EngineError("'" + s.info.name + "' is not a volume representation");
    return s.tf;
}

RenderCapture MockEngine::render()
{
    const Source* first_visible = nullptr;
    const Source* volume = nullptr;
    for (const auto& s : sources_) {
        if (!s.info.visible)
            continue;
        if (first_visible == nullptr)
            first_visible = &s;
        if (volume == nullptr && s.info.kind == SourceKind::volume_repr)
            volume = &s;
    }
    if (first_visible == nullptr)
        throw EngineError("nothing to render: no visible sources");

    const Source& range_owner = reader_ancestor(volume ? volume->info.id : first_visible->info.id);
    const ScalarRange range = range_owner.field.range();

    // Geometry-only pipelines render as a flat gray stripe stack; volume
    // representations render their transfer function.
    TransferFunction tf;
    if (volume != nullptr) {
        tf = volume->tf;
    } else {
        tf.color_points = {{range.lo, 0.75, 0.75, 0.75}, {range.hi, 0.75, 0.75, 0.75}};
        tf.opacity_points = {{range.lo, 1.0}, {range.hi, 1.0}};
    }

    RenderCapture capture;
    capture.width = kRenderWidth;
    capture.height = kRenderHeight;

    std::vector<BandColor> report;
    report.reserve(kRenderBands);
    const double span = range.hi - range.lo;
    for (int b = 0; b < kRenderBands; ++b) {
        const double lo = range.lo + span * b / kRenderBands;
        const double hi = range.lo + span * (b + 1) / kRenderBands;
        const double mid = range.lo + span * (b + 0.5) / kRenderBands;
        const auto rgb = tf.color_at(mid);
        report.push_back({lo, hi, rgb[0], rgb[1], rgb[2], tf.opacity_at(mid)});
    }

    png::Image image;
    image.width = kRenderWidth;
    image.height = kRenderHeight;
    image.rgb.resize(static_cast<std::size_t>(kRenderWidth) * kRenderHeight * 3);
    const int rows_per_band = kRenderHeight / kRenderBands;
    for (int y = 0; y < kRenderHeight; ++y) {
        // Band 0 (lowest scalars) at the bottom of the image.
        const int band = std::min(kRenderBands - 1, (kRenderHeight - 1 - y) / rows_per_band);
        const BandColor& c = report[static_cast<std::size_t>(band)];
        const auto quantize = [&](double channel) {
            return static_cast<std::uint8_t>(std::lround(255.0 * clamp01(channel * c.alpha)));
        };
        const std::uint8_t r = quantize(c.r), g = quantize(c.g), bl = quantize(c.b);
        for (int x = 0; x < kRenderWidth; ++x) {
            const std::size_t o = (static_cast<std::size_t>(y) * kRenderWidth + x) * 3;
            image.rgb[o] = r;
            image.rgb[o + 1] = g;
            image.rgb[o + 2] = bl;
        }
    }

    // Stamp the full session state so any state change is observable in the
    // encoded bytes (camera moves, visibility flips, parameter edits).
    std::ostringstream state;
    char buf[64];
    std::snprintf(buf, sizeof buf, "azimuth=%.6f;elevation=%.6f", camera_.azimuth_deg,
                  camera_.elevation_deg);
    state << buf;
    for (const auto& s : sources_) {
        state << ";" << to_string(s.info.kind) << ":" << s.info.name << ":"
              << (s.info.visible ? "visible" : "hidden");
        if (s.info.kind == SourceKind::contour)
            state << ":value=" << s.info.params.at("value").dump();
        if (s.info.kind == SourceKind::volume_repr)
            state << ":tf=" << s.tf.to_json().dump();
    }
    image.text["vizbridge-state"] = state.str();

    capture.png = png::encode(image);
    capture.band_report = std::move(report);
    return capture;
}

void MockEngine::reset_camera()
{
    camera_ = CameraState{};
}

CameraState MockEngine::orbit(double azimuth_deg, double elevation_deg)
{
    double az = std::fmod(camera_.azimuth_deg + azimuth_deg, 360.0);
    if (az < 0.0)
        az += 360.0;
    camera_.azimuth_deg = az;
    camera_.elevation_deg = std::clamp(camera_.elevation_deg + elevation_deg, -90.0, 90.0);
    return camera_;
}

CameraState MockEngine::camera() const
{
    return camera_;
}

void MockEngine::delete_source(const SourceId& id)
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
    sources_.erase(std::find_if(sources_.begin(), sources_.end(),
                                [&](const Source& s) { return s.info.id == id; }));
}

void MockEngine::set_visibility(const SourceId& id, bool visible)
{
    find(id).info.visible = visible;
}

} // namespace vizbridge
