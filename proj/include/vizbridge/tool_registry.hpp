#pragma once

#include "vizbridge/engine.hpp"
#include "vizbridge/tool_result.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace vizbridge {

/// One parameter of a curated tool. The static constraints declared here
/// (type, required, min/max, enum) are exactly what call-time validation
/// enforces; dynamic, state-dependent rules live in `constraint_note` and
/// are enforced by the engine.
struct ParamSpec {
    enum class Type { number, integer, string, boolean, array };

    std::string name;
    Type type = Type::string;
    bool required = true;
    std::string description;
    std::optional<double> min;
    std::optional<double> max;
    std::vector<std::string> enum_values;
    std::string constraint_note;

    json schema_json() const;
};

/// Agent-facing contract of one curated capability.
struct ToolDescriptor {
    std::string name;
    std::string description;
    std::vector<ParamSpec> params;
    std::string returns;

    json schema_json() const;  // JSON-Schema object for tools/list
    json to_json() const;      // full wire form {name, description, inputSchema, returns}
};

/// Per-session state: the engine handle, the single active-source concession,
/// screenshot numbering, and the append-only session log (one JSON object per
/// line: timestamp, tool, arguments, result digest).
class SessionContext {
public:
    SessionContext(Engine& engine, std::filesystem::path screenshot_dir);

    Engine& engine() { return engine_; }
    const Engine& engine() const { return engine_; }

    const std::optional<SourceId>& active_source() const { return active_source_; }
    void set_active_source(SourceId id) { active_source_ = std::move(id); }
    void clear_active_source() { active_source_.reset(); }

    const std::filesystem::path& screenshot_dir() const { return screenshot_dir_; }
    std::filesystem::path session_log_path() const;
    int next_shot_number() { return ++shot_counter_; }

    void append_log(const std::string& tool, const json& arguments, const ToolResult& result);

private:
    Engine& engine_;
    std::filesystem::path screenshot_dir_;
    std::ofstream log_;
    int shot_counter_ = 0;
    std::optional<SourceId> active_source_;
};

/// The curated, hard-coded tool set mapping MCP tool calls onto the engine
/// contract. Apart from the active source, every call queries the engine
/// fresh, so mutations applied by other clients of a shared session are
/// always visible.
class ToolRegistry {
public:
    explicit ToolRegistry(SessionContext& session);

    const std::vector<ToolDescriptor>& descriptors() const { return descriptors_; }
    const ToolDescriptor* descriptor(const std::string& name) const;

    /// Dispatches one tool call. Never throws; every failure comes back as
    /// an is_error result, and every call (including failures) appends one
    /// session-log entry.
    ToolResult call(const std::string& name, const json& arguments);

private:
    using Handler = std::function<ToolResult(ToolRegistry&, const json&)>;

    void register_tool(ToolDescriptor descriptor, Handler handler);
    ToolResult dispatch(const std::string& name, const json& arguments);
    std::optional<ToolResult> validate_arguments(const ToolDescriptor& d, const json& arguments);

    /// exact id > exact name > unique case-insensitive substring.
    PipelineSource resolve_source(const std::string& name_or_id);
    PipelineSource active_or_fail();
    PipelineSource reader_of_active();
    /// The volume representation of the active source (itself, or the child
    /// of the active reader).
    PipelineSource volume_of_active();

    SessionContext& session_;
    std::vector<ToolDescriptor> descriptors_;
    std::vector<Handler> handlers_;  // parallel to descriptors_
};

/// ISO-8601 UTC timestamp with millisecond precision.
std::string iso8601_now();

} // namespace vizbridge
