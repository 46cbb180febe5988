#pragma once

#include "vizbridge/mcp_server.hpp"
#include "vizbridge/tool_result.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vizbridge {

class TraceError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Per-step assertion. Exactly one of the fields is set; a step with no
/// expectation at all asserts plain success (is_error == false).
struct Expect {
    struct Numeric {
        std::string path;  // dotted path into the structured payload
        double value = 0.0;
        double rel_tol = 0.01;
    };

    std::optional<std::string> text_contains;
    std::optional<Numeric> numeric;
    std::optional<bool> is_error;
    std::optional<bool> has_image;

    json to_json() const;
    static Expect from_json(const json& j);
};

struct TraceStep {
    std::string tool;
    json arguments = json::object();
    std::optional<Expect> expect;

    json to_json() const;
    static TraceStep from_json(const json& j);
};

/// A recorded or hand-written tool-call sequence; the deterministic stand-in
/// for the MLLM client.
struct Trace {
    static constexpr int kVersion = 1;

    std::string name;
    std::string backend = "mock";
    std::string comment;  // e.g. a description of the visual example being reproduced
    std::vector<TraceStep> steps;

    json to_json() const;
    static Trace from_json(const json& j);
    static Trace load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

struct StepReport {
    int index = 0;
    std::string tool;
    bool passed = false;
    std::string detail;    // expected-vs-actual diagnostic on failure
    double micros = 0.0;
};

struct ReplayReport {
    std::vector<StepReport> steps;
    bool all_passed = true;
    int failed_index = -1;

    json to_json() const;
    std::string summary() const;  // one line per step
};

/// Replays a trace against an in-process server, driving the wire path
/// (encode -> decode -> dispatch -> encode) for every step. Initializes the
/// session first. A failed assertion halts the trace at that step.
ReplayReport replay(const Trace& trace, mcp::McpServer& server);

/// Converts a session log (JSON lines) into a trace. Failed calls assert
/// is_error; successful calls with a numeric payload assert the first
/// numeric leaf at rel_tol 0.01; image results assert has_image.
/// Throws TraceError with the line number on malformed input.
Trace record(const std::filesystem::path& session_log);

/// Assertion core, shared by replay() and tests.
/// Returns an empty string when the expectation holds, else the diagnostic.
std::string check_expectation(const Expect& expect, const ToolResult& result);

} // namespace vizbridge
