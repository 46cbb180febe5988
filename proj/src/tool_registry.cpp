#include "vizbridge/tool_registry.hpp"

#include "vizbridge/base64.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <sstream>

namespace vizbridge {

namespace {

std::string type_name(ParamSpec::Type t)
{
    switch (t) {
    case ParamSpec::Type::number: return "number";
    case ParamSpec::Type::integer: return "integer";
    case ParamSpec::Type::string: return "string";
    case ParamSpec::Type::boolean: return "boolean";
    case ParamSpec::Type::array: return "array";
    }
    return "string";
}

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

/// prose + fenced JSON block in one text item.
ToolResult ok(const std::string& prose, const json& payload)
{
    return ToolResult::text(prose + "\n\n```json\n" + payload.dump() + "\n```");
}

std::string first_line(const std::string& text)
{
    const auto nl = text.find('\n');
    std::string line = nl == std::string::npos ? text : text.substr(0, nl);
    if (line.size() > 200)
        line.resize(200);
    return line;
}

json range_json(const ScalarRange& r)
{
    return json::array({r.lo, r.hi});
}

} // namespace

std::string iso8601_now()
{
    using namespace std::chrono;
    const auto now = system_clock::now();
    const auto ms = duration_cast<milliseconds>(now.time_since_epoch()) % 1000;
    const std::time_t t = system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                  static_cast<int>(ms.count()));
    return buf;
}

json ParamSpec::schema_json() const
{
    json j{{"type", type_name(type)}, {"description", description}};
    if (min)
        j["minimum"] = *min;
    if (max)
        j["maximum"] = *max;
    if (!enum_values.empty())
        j["enum"] = enum_values;
    if (!constraint_note.empty())
        j["constraint"] = constraint_note;
    return j;
}

json ToolDescriptor::schema_json() const
{
    json properties = json::object();
    json required = json::array();
    for (const auto& p : params) {
        properties[p.name] = p.schema_json();
        if (p.required)
            required.push_back(p.name);
    }
    json schema{{"type", "object"}, {"properties", properties}};
    if (!required.empty())
        schema["required"] = required;
    return schema;
}

json ToolDescriptor::to_json() const
{
    return {{"name", name},
            {"description", description},
            {"inputSchema", schema_json()},
            {"returns", returns}};
}

SessionContext::SessionContext(Engine& engine, std::filesystem::path screenshot_dir)
    : engine_(engine), screenshot_dir_(std::move(screenshot_dir))
{
    std::filesystem::create_directories(screenshot_dir_);
    log_.open(session_log_path(), std::ios::app);
}

std::filesystem::path SessionContext::session_log_path() const
{
    return screenshot_dir_ / "session-log.jsonl";
}

void SessionContext::append_log(const std::string& tool, const json& arguments,
                                const ToolResult& result)
{
    json digest{{"is_error", result.is_error},
                {"has_image", result.has_image()},
                {"summary", first_line(result.first_text())}};
    if (auto payload = result.payload())
        digest["payload"] = *payload;
    else
        digest["payload"] = nullptr;

    const json entry{{"ts", iso8601_now()},
                     {"tool", tool},
                     {"arguments", arguments.is_null() ? json::object() : arguments},
                     {"digest", digest}};
    log_ << entry.dump() << "\n";
    log_.flush();
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

ToolRegistry::ToolRegistry(SessionContext& session) : session_(session)
{
    using Type = ParamSpec::Type;

    register_tool(
        {"load_data",
         "Load a dataset and register it as a reader source. Accepts a file path or, on the "
         "mock backend, an inline JSON field spec such as {\"family\":\"radial\"}. The new "
         "reader becomes the active source.",
         {{"path_or_spec", Type::string, true,
           "Dataset path, path to a field-spec JSON file, or inline field-spec JSON.",
           std::nullopt, std::nullopt, {},
           "must name a readable dataset or parse as a field spec"}},
         "summary with the reader name and its scalar range"},
        [](ToolRegistry& self, const json& args) {
            auto& eng = self.session_.engine();
            const PipelineSource src =
                eng.load_dataset(args.at("path_or_spec").get<std::string>());
            self.session_.set_active_source(src.id);
            const ScalarRange range = eng.scalar_range(src.id);
            return ok("loaded reader '" + src.name + "', scalar range [" +
                          format_double(range.lo) + ", " + format_double(range.hi) + "]",
                      {{"id", src.id},
                       {"name", src.name},
                       {"kind", "reader"},
                       {"scalar_range", range_json(range)}});
        });

    register_tool(
        {"list_sources",
         "List pipeline sources in creation order, marking the active one. Optional filters "
         "narrow by kind or by name substring.",
         {{"kind", Type::string, false, "Keep only sources of this kind.", std::nullopt,
           std::nullopt, {"reader", "contour", "volume_repr"}, ""},
          {"name", Type::string, false, "Keep only sources whose name contains this substring "
           "(case-insensitive).", std::nullopt, std::nullopt, {}, ""}},
         "listing of sources with id, kind, parameters, and visibility"},
        [](ToolRegistry& self, const json& args) {
            std::optional<SourceKind> kind;
            if (args.contains("kind"))
                kind = source_kind_from_string(args["kind"].get<std::string>());
            const std::string name = args.value("name", "");
            const auto sources = self.session_.engine().list_sources(kind, name);
            const auto& active = self.session_.active_source();

            json payload{{"sources", json::array()}, {"active", active ? json(*active) : json()}};
            if (sources.empty())
                return ok("no sources loaded", payload);

            std::ostringstream prose;
            prose << sources.size() << (sources.size() == 1 ? " source:" : " sources:");
            for (const auto& s : sources) {
                prose << "\n- " << s.id << " '" << s.name << "' (" << to_string(s.kind);
                if (s.kind == SourceKind::contour)
                    prose << ", value=" << format_double(s.params.at("value").get<double>());
                prose << (s.visible ? ", visible)" : ", hidden)");
                if (active && *active == s.id)
                    prose << " [active]";
                payload["sources"].push_back(s.to_json());
            }
            return ok(prose.str(), payload);
        });

    register_tool(
        {"get_active_source", "Report which source subsequent tools operate on.", {},
         "the active source, or a note that none is set"},
        [](ToolRegistry& self, const json&) {
            const auto& active = self.session_.active_source();
            if (!active)
                return ok("no active source", {{"active", nullptr}});
            const PipelineSource src = self.active_or_fail();
            return ok("active source: '" + src.name + "' (" + std::string(to_string(src.kind)) +
                          ", " + src.id + ")",
                      {{"active", src.to_json()}});
        });

    register_tool(
        {"set_active_source",
         "Select the source subsequent tools operate on. Accepts an exact id, an exact name, "
         "or a unique case-insensitive name substring.",
         {{"name_or_id", Type::string, true, "Source id, name, or unique name substring.",
           std::nullopt, std::nullopt, {}, "must match exactly one existing source"}},
         "acknowledgement naming the new active source"},
        [](ToolRegistry& self, const json& args) {
            const PipelineSource src =
                self.resolve_source(args.at("name_or_id").get<std::string>());
            self.session_.set_active_source(src.id);
            return ok("active source set to '" + src.name + "' (" + src.id + ")",
                      {{"active", src.to_json()}});
        });

    register_tool(
        {"create_isosurface",
         "Extract the level set of the active reader at the given value as a new contour "
         "source. The contour becomes the active source.",
         {{"value", Type::number, true, "Isovalue at which to extract the surface.",
           std::nullopt, std::nullopt, {},
           "strictly inside the active reader's scalar range"}},
         "the new contour source and, when defined, its surface area"},
        [](ToolRegistry& self, const json& args) {
            const PipelineSource active = self.active_or_fail();
            if (active.kind != SourceKind::reader)
                throw EngineError("create_isosurface requires the active source to be a reader; "
                                  "'" + active.name + "' is a " +
                                  std::string(to_string(active.kind)));
            auto& eng = self.session_.engine();
            const PipelineSource contour =
                eng.create_contour(active.id, args.at("value").get<double>());
            self.session_.set_active_source(contour.id);

            json payload{{"id", contour.id},
                         {"name", contour.name},
                         {"value", contour.params.at("value")}};
            std::string note;
            try {
                const double area = eng.surface_area(contour.id);
                payload["area"] = area;
                note = "; surface area " + format_double(area);
            } catch (const EngineError& e) {
                note = std::string("; surface area unavailable: ") + e.what();
            }
            return ok("created isosurface '" + contour.name + "' at value " +
                          format_double(contour.params.at("value").get<double>()) + note,
                      payload);
        });

    register_tool(
        {"update_isosurface",
         "Move the active contour to a new isovalue.",
         {{"value", Type::number, true, "New isovalue.", std::nullopt, std::nullopt, {},
           "strictly inside the parent reader's scalar range"}},
         "the updated contour and, when defined, its surface area"},
        [](ToolRegistry& self, const json& args) {
            const PipelineSource active = self.active_or_fail();
            auto& eng = self.session_.engine();
            const PipelineSource contour =
                eng.set_contour_value(active.id, args.at("value").get<double>());

            json payload{{"id", contour.id},
                         {"name", contour.name},
                         {"value", contour.params.at("value")}};
            std::string note;
            try {
                const double area = eng.surface_area(contour.id);
                payload["area"] = area;
                note = "; surface area " + format_double(area);
            } catch (const EngineError& e) {
                note = std::string("; surface area unavailable: ") + e.what();
            }
            return ok("isosurface '" + contour.name + "' moved to value " +
                          format_double(contour.params.at("value").get<double>()) + note,
                      payload);
        });

    register_tool(
        {"get_surface_area",
         "Measure the surface area of the active contour in squared domain units.", {},
         "the surface area"},
        [](ToolRegistry& self, const json&) {
            const PipelineSource active = self.active_or_fail();
            const double area = self.session_.engine().surface_area(active.id);
            return ok("surface area of '" + active.name + "' at value " +
                          format_double(active.params.at("value").get<double>()) + ": " +
                          format_double(area),
                      {{"area", area},
                       {"name", active.name},
                       {"value", active.params.at("value")}});
        });

    register_tool(
        {"get_scalar_range",
         "Exact scalar min/max of the active source's dataset (the reader ancestor).", {},
         "the scalar range [lo, hi]"},
        [](ToolRegistry& self, const json&) {
            const PipelineSource active = self.active_or_fail();
            const PipelineSource reader = self.reader_of_active();
            const ScalarRange range = self.session_.engine().scalar_range(active.id);
            return ok("scalar range of '" + reader.name + "': [" + format_double(range.lo) +
                          ", " + format_double(range.hi) + "]",
                      {{"lo", range.lo}, {"hi", range.hi}, {"source", reader.name}});
        });

    register_tool(
        {"get_histogram",
         "Histogram of the active source's dataset over a fixed deterministic sample grid. "
         "Bins partition the scalar range; counts sum to the grid size.",
         {{"bins", Type::integer, true, "Number of equal-width bins.", 1, 4096, {}, ""}},
         "per-bin ranges and counts"},
        [](ToolRegistry& self, const json& args) {
            const PipelineSource active = self.active_or_fail();
            const PipelineSource reader = self.reader_of_active();
            const auto bins =
                self.session_.engine().histogram(active.id, args.at("bins").get<int>());

            std::int64_t total = 0;
            json rows = json::array();
            for (const auto& b : bins) {
                total += b.count;
                rows.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}});
            }
            std::ostringstream prose;
            prose << "histogram of '" << reader.name << "' (" << bins.size() << " bins, "
                  << total << " samples)";
            if (bins.size() <= 16)
                for (const auto& b : bins)
                    prose << "\n- [" << format_double(b.lo) << ", " << format_double(b.hi)
                          << "): " << b.count;
            return ok(prose.str(),
                      {{"bins", rows}, {"total", total}, {"source", reader.name}});
        });

    register_tool(
        {"toggle_volume_rendering",
         "Enable volume rendering for the active reader, or toggle the visibility of its "
         "existing volume representation. The representation starts with a blue-to-red "
         "default color map and linear opacity.",
         {},
         "acknowledgement naming the volume representation and what changed"},
        [](ToolRegistry& self, const json&) {
            const PipelineSource active = self.active_or_fail();
            if (active.kind != SourceKind::reader)
                throw EngineError("toggle_volume_rendering requires the active source to be a "
                                  "reader; '" + active.name + "' is a " +
                                  std::string(to_string(active.kind)));
            auto& eng = self.session_.engine();

            for (const auto& s : eng.list_sources(SourceKind::volume_repr, {})) {
                if (s.parent_id == active.id) {
                    const bool now_visible = !s.visible;
                    eng.set_visibility(s.id, now_visible);
                    const char* action = now_visible ? "shown" : "hidden";
                    return ok("volume representation '" + s.name + "' " + action,
                              {{"id", s.id},
                               {"name", s.name},
                               {"action", action},
                               {"transfer_function", eng.transfer_function(s.id).to_json()}});
                }
            }

            const PipelineSource vol = eng.enable_volume_rendering(active.id);
            return ok("volume rendering enabled for '" + active.name + "' ('" + vol.name + "')",
                      {{"id", vol.id},
                       {"name", vol.name},
                       {"action", "enabled"},
                       {"transfer_function", eng.transfer_function(vol.id).to_json()}});
        });

    register_tool(
        {"set_color_map",
         "Replace the color control points of the active volume representation. Opacity "
         "points are untouched. The replacement is atomic: it validates fully before "
         "anything changes.",
         {{"points", Type::array, true,
           "Color points as [scalar, r, g, b] quadruples.", std::nullopt, std::nullopt, {},
           "at least two points; scalars strictly increasing and within the scalar range; "
           "channels in [0, 1]"}},
         "acknowledgement with the resulting transfer function"},
        [](ToolRegistry& self, const json& args) {
            const PipelineSource vol = self.volume_of_active();
            auto& eng = self.session_.engine();

            TransferFunction tf = eng.transfer_function(vol.id);
            tf.color_points.clear();
            const auto& pts = args.at("points");
            for (std::size_t i = 0; i < pts.size(); ++i) {
                const auto& p = pts[i];
                if (!p.is_array() || p.size() != 4 || !p[0].is_number() || !p[1].is_number() ||
                    !p[2].is_number() || !p[3].is_number())
                    throw EngineError("points[" + std::to_string(i) +
                                      "]: expected [scalar, r, g, b] numbers");
                tf.color_points.push_back({p[0].get<double>(), p[1].get<double>(),
                                           p[2].get<double>(), p[3].get<double>()});
            }
            eng.set_transfer_function(vol.id, tf);
            return ok("color map of '" + vol.name + "' set (" +
                          std::to_string(tf.color_points.size()) + " points)",
                      {{"transfer_function", eng.transfer_function(vol.id).to_json()}});
        });

    register_tool(
        {"set_opacity_map",
         "Replace the opacity control points of the active volume representation. Color "
         "points are untouched. The replacement is atomic.",
         {{"points", Type::array, true, "Opacity points as [scalar, alpha] pairs.",
           std::nullopt, std::nullopt, {},
           "at least two points; scalars strictly increasing and within the scalar range; "
           "alpha in [0, 1]"}},
         "acknowledgement with the resulting transfer function"},
        [](ToolRegistry& self, const json& args) {
            const PipelineSource vol = self.volume_of_active();
            auto& eng = self.session_.engine();

            TransferFunction tf = eng.transfer_function(vol.id);
            tf.opacity_points.clear();
            const auto& pts = args.at("points");
            for (std::size_t i = 0; i < pts.size(); ++i) {
                const auto& p = pts[i];
                if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
                    throw EngineError("points[" + std::to_string(i) +
                                      "]: expected [scalar, alpha] numbers");
                tf.opacity_points.push_back({p[0].get<double>(), p[1].get<double>()});
            }
            eng.set_transfer_function(vol.id, tf);
            return ok("opacity map of '" + vol.name + "' set (" +
                          std::to_string(tf.opacity_points.size()) + " points)",
                      {{"transfer_function", eng.transfer_function(vol.id).to_json()}});
        });

    register_tool(
        {"take_screenshot",
         "Render the current pipeline and return the viewport as a PNG image. The file is "
         "also written to the screenshot directory. On the mock backend the text includes a "
         "per-band color report.",
         {},
         "one text item (path and band report) and one PNG image item"},
        [](ToolRegistry& self, const json&) {
            auto& eng = self.session_.engine();
            const RenderCapture capture = eng.render();

            const int shot = self.session_.next_shot_number();
            char name[32];
            std::snprintf(name, sizeof name, "shot-%04d.png", shot);
            const auto path = self.session_.screenshot_dir() / name;
            {
                std::ofstream out(path, std::ios::binary);
                out.write(reinterpret_cast<const char*>(capture.png.data()),
                          static_cast<std::streamsize>(capture.png.size()));
                if (!out)
                    throw EngineError("cannot write screenshot to " + path.string());
            }

            json payload{{"path", path.string()},
                         {"shot", shot},
                         {"width", capture.width},
                         {"height", capture.height}};
            std::ostringstream prose;
            prose << "screenshot saved to " << path.string() << " (" << capture.width << "x"
                  << capture.height << ")";
            if (capture.band_report) {
                prose << "\nband report (scalar band -> color r,g,b with opacity):";
                json rows = json::array();
                for (const auto& b : *capture.band_report) {
                    prose << "\n- [" << format_double(b.lo) << ", " << format_double(b.hi)
                          << "] -> (" << format_double(b.r) << ", " << format_double(b.g)
                          << ", " << format_double(b.b) << ") alpha " << format_double(b.alpha);
                    rows.push_back({{"lo", b.lo},
                                    {"hi", b.hi},
                                    {"r", b.r},
                                    {"g", b.g},
                                    {"b", b.b},
                                    {"alpha", b.alpha}});
                }
                payload["band_report"] = rows;
            }

            ToolResult result = ok(prose.str(), payload);
            result.add_image(base64_encode(capture.png), "image/png");
            return result;
        });

    register_tool(
        {"reset_camera", "Reset the camera to its initial orientation.", {},
         "acknowledgement with the camera state"},
        [](ToolRegistry& self, const json&) {
            self.session_.engine().reset_camera();
            const CameraState cam = self.session_.engine().camera();
            return ok("camera reset",
                      {{"azimuth", cam.azimuth_deg}, {"elevation", cam.elevation_deg}});
        });

    register_tool(
        {"rotate_camera",
         "Orbit the camera. Azimuth accumulates modulo 360; elevation clamps to [-90, 90].",
         {{"azimuth", Type::number, true, "Azimuth delta in degrees.", std::nullopt,
           std::nullopt, {}, ""},
          {"elevation", Type::number, true, "Elevation delta in degrees.", std::nullopt,
           std::nullopt, {}, ""}},
         "acknowledgement with the resulting camera state"},
        [](ToolRegistry& self, const json& args) {
            const CameraState cam = self.session_.engine().orbit(
                args.at("azimuth").get<double>(), args.at("elevation").get<double>());
            return ok("camera orbited to azimuth " + format_double(cam.azimuth_deg) +
                          ", elevation " + format_double(cam.elevation_deg),
                      {{"azimuth", cam.azimuth_deg}, {"elevation", cam.elevation_deg}});
        });

    register_tool(
        {"delete_source",
         "Delete a source. Sources with dependent children cannot be deleted until the "
         "children are removed.",
         {{"name_or_id", Type::string, true, "Source id, name, or unique name substring.",
           std::nullopt, std::nullopt, {}, "must match exactly one existing source"}},
         "acknowledgement; notes when the active source was cleared"},
        [](ToolRegistry& self, const json& args) {
            const PipelineSource src =
                self.resolve_source(args.at("name_or_id").get<std::string>());
            self.session_.engine().delete_source(src.id);

            bool cleared = false;
            if (self.session_.active_source() == std::optional<SourceId>(src.id)) {
                self.session_.clear_active_source();
                cleared = true;
            }
            std::string prose = "deleted '" + src.name + "' (" + src.id + ")";
            if (cleared)
                prose += "; active source cleared";
            return ok(prose, {{"deleted", src.id}, {"active_cleared", cleared}});
        });

    register_tool(
        {"describe_tools",
         "List every available tool with its parameters and constraints.", {},
         "the full tool catalog"},
        [](ToolRegistry& self, const json&) {
            json tools = json::array();
            std::ostringstream prose;
            prose << self.descriptors_.size() << " tools available:";
            for (const auto& d : self.descriptors_) {
                prose << "\n- " << d.name << ": " << d.description;
                tools.push_back(d.to_json());
            }
            return ok(prose.str(), {{"tools", tools}});
        });
}

void ToolRegistry::register_tool(ToolDescriptor descriptor, Handler handler)
{
    descriptors_.push_back(std::move(descriptor));
    handlers_.push_back(std::move(handler));
}

const ToolDescriptor* ToolRegistry::descriptor(const std::string& name) const
{
    for (const auto& d : descriptors_)
        if (d.name == name)
            return &d;
    return nullptr;
}

ToolResult ToolRegistry::call(const std::string& name, const json& arguments)
{
    ToolResult result = dispatch(name, arguments);
    if (result.content.empty())
        result.add_text(result.is_error ? "tool failed" : "ok");
    session_.append_log(name, arguments, result);
    return result;
}

ToolResult ToolRegistry::dispatch(const std::string& name, const json& arguments)
{
    std::size_t index = descriptors_.size();
    for (std::size_t i = 0; i < descriptors_.size(); ++i)
        if (descriptors_[i].name == name)
            index = i;
    if (index == descriptors_.size())
        return ToolResult::error("unknown tool '" + name + "'");

    if (!arguments.is_object() && !arguments.is_null())
        return ToolResult::error("arguments must be a JSON object");
    const json args = arguments.is_null() ? json::object() : arguments;

    if (auto failure = validate_arguments(descriptors_[index], args))
        return *failure;

    try {
        return handlers_[index](*this, args);
    } catch (const EngineError& e) {
        return ToolResult::error(e.what());
    } catch (const std::exception& e) {
        return ToolResult::error(std::string("internal error: ") + e.what());
    } catch (...) {
        return ToolResult::error("internal error");
    }
}

std::optional<ToolResult> ToolRegistry::validate_arguments(const ToolDescriptor& d,
                                                           const json& arguments)
{
    for (auto it = arguments.begin(); it != arguments.end(); ++it) {
        const bool known = std::any_of(d.params.begin(), d.params.end(),
                                       [&](const ParamSpec& p) { return p.name == it.key(); });
        if (!known)
            return ToolResult::error("unexpected parameter '" + it.key() + "' for tool '" +
                                     d.name + "'");
    }

    for (const auto& p : d.params) {
        if (!arguments.contains(p.name)) {
            if (p.required)
                return ToolResult::error("missing required parameter '" + p.name + "'");
            continue;
        }
        const json& v = arguments[p.name];
        switch (p.type) {
        case ParamSpec::Type::number:
            if (!v.is_number())
                return ToolResult::error("parameter '" + p.name + "' must be a number");
            if (!std::isfinite(v.get<double>()))
                return ToolResult::error("parameter '" + p.name + "' must be finite");
            break;
        case ParamSpec::Type::integer: {
            if (!v.is_number())
                return ToolResult::error("parameter '" + p.name + "' must be an integer");
            const double d_val = v.get<double>();
            if (!std::isfinite(d_val) || d_val != std::floor(d_val))
                return ToolResult::error("parameter '" + p.name + "' must be an integer");
            break;
        }
        case ParamSpec::Type::string:
            if (!v.is_string())
                return ToolResult::error("parameter '" + p.name + "' must be a string");
            break;
        case ParamSpec::Type::boolean:
            if (!v.is_boolean())
                return ToolResult::error("parameter '" + p.name + "' must be a boolean");
            break;
        case ParamSpec::Type::array:
            if (!v.is_array())
                return ToolResult::error("parameter '" + p.name + "' must be an array");
            break;
        }
        if (v.is_number()) {
            const double d_val = v.get<double>();
            if (p.min && d_val < *p.min)
                return ToolResult::error("parameter '" + p.name + "' must be >= " +
                                         format_double(*p.min));
            if (p.max && d_val > *p.max)
                return ToolResult::error("parameter '" + p.name + "' must be <= " +
                                         format_double(*p.max));
        }
        if (!p.enum_values.empty() && v.is_string()) {
            const std::string s = v.get<std::string>();
            if (std::find(p.enum_values.begin(), p.enum_values.end(), s) == p.enum_values.end()) {
                std::string allowed;
                for (const auto& e : p.enum_values)
                    allowed += (allowed.empty() ? "" : ", ") + e;
                return ToolResult::error("parameter '" + p.name + "' must be one of: " + allowed);
            }
        }
    }
    return std::nullopt;
}

PipelineSource ToolRegistry::resolve_source(const std::string& name_or_id)
{
    const auto sources = session_.engine().list_sources(std::nullopt, {});
    for (const auto& s : sources)
        if (s.id == name_or_id)
            return s;
    for (const auto& s : sources)
        if (s.name == name_or_id)
            return s;

    const std::string needle = lower(name_or_id);
    std::vector<PipelineSource> matches;
    for (const auto& s : sources)
        if (lower(s.name).find(needle) != std::string::npos)
            matches.push_back(s);

    if (matches.size() == 1)
        return matches.front();
    if (matches.empty())
        throw EngineError("no source matches '" + name_or_id + "'");
    std::string names;
    for (const auto& m : matches)
        names += (names.empty() ? "" : ", ") + m.name;
    throw EngineError("ambiguous name '" + name_or_id + "': matches " + names);
}

PipelineSource ToolRegistry::active_or_fail()
{
    const auto& active = session_.active_source();
    if (!active)
        throw EngineError("no active source; use load_data or set_active_source first");
    try {
        return session_.engine().get_source(*active);
    } catch (const EngineError&) {
        // The source was deleted out from under us (e.g. by the GUI user in
        // a shared session); drop the stale reference.
        session_.clear_active_source();
        throw EngineError("no active source (the previous active source no longer exists)");
    }
}

PipelineSource ToolRegistry::reader_of_active()
{
    PipelineSource src = active_or_fail();
    while (src.kind != SourceKind::reader) {
        if (!src.parent_id)
            throw EngineError("source '" + src.name + "' has no reader ancestor");
        src = session_.engine().get_source(*src.parent_id);
    }
    return src;
}

PipelineSource ToolRegistry::volume_of_active()
{
    const PipelineSource active = active_or_fail();
    if (active.kind == SourceKind::volume_repr)
        return active;
    if (active.kind == SourceKind::reader) {
        for (const auto& s : session_.engine().list_sources(SourceKind::volume_repr, {}))
            if (s.parent_id == active.id)
                return s;
        throw EngineError("'" + active.name +
                          "' has no volume representation; call toggle_volume_rendering first");
    }
    throw EngineError("'" + active.name + "' (" + std::string(to_string(active.kind)) +
                      ") has no volume representation");
}

} // namespace vizbridge
