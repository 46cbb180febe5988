#include "vizbridge/trace_harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace vizbridge {

json Expect::to_json() const
{
    json j = json::object();
    if (text_contains)
        j["text_contains"] = *text_contains;
    if (numeric)
        j["numeric"] = {{"path", numeric->path},
                        {"value", numeric->value},
                        {"rel_tol", numeric->rel_tol}};
    if (is_error)
        j["is_error"] = *is_error;
    if (has_image)
        j["has_image"] = *has_image;
    return j;
}

Expect Expect::from_json(const json& j)
{
    Expect e;
    if (j.contains("text_contains"))
        e.text_contains = j["text_contains"].get<std::string>();
    if (j.contains("numeric")) {
        Numeric n;
        n.path = j["numeric"].at("path").get<std::string>();
        n.value = j["numeric"].at("value").get<double>();
        n.rel_tol = j["numeric"].value("rel_tol", 0.01);
        e.numeric = n;
    }
    if (j.contains("is_error"))
        e.is_error = j["is_error"].get<bool>();
    if (j.contains("has_image"))
        e.has_image = j["has_image"].get<bool>();
    return e;
}

json TraceStep::to_json() const
{
    json j{{"tool", tool}, {"arguments", arguments}};
    if (expect)
        j["expect"] = expect->to_json();
    return j;
}

TraceStep TraceStep::from_json(const json& j)
{
    TraceStep s;
    s.tool = j.at("tool").get<std::string>();
    s.arguments = j.value("arguments", json::object());
    if (j.contains("expect"))
        s.expect = Expect::from_json(j["expect"]);
    return s;
}

json Trace::to_json() const
{
    json steps_json = json::array();
    for (const auto& s : steps)
        steps_json.push_back(s.to_json());
    json j{{"trace_version", kVersion},
           {"name", name},
           {"backend", backend},
           {"steps", steps_json}};
    if (!comment.empty())
        j["comment"] = comment;
    return j;
}

Trace Trace::from_json(const json& j)
{
    if (j.value("trace_version", 0) != kVersion)
        throw TraceError("unsupported trace_version (expected " + std::to_string(kVersion) + ")");
    Trace t;
    t.name = j.value("name", "");
    t.backend = j.value("backend", "mock");
    t.comment = j.value("comment", "");
    for (const auto& s : j.at("steps"))
        t.steps.push_back(TraceStep::from_json(s));
    return t;
}

Trace Trace::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw TraceError("cannot open trace file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw TraceError("trace file " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

void Trace::save(const std::filesystem::path& path) const
{
    std::ofstream out(path);
    if (!out)
        throw TraceError("cannot write trace file " + path.string());
    out << to_json().dump(2) << "\n";
}

json ReplayReport::to_json() const
{
    json steps_json = json::array();
    for (const auto& s : steps)
        steps_json.push_back({{"index", s.index},
                              {"tool", s.tool},
                              {"passed", s.passed},
                              {"detail", s.detail},
                              {"micros", s.micros}});
    return {{"steps", steps_json}, {"all_passed", all_passed}, {"failed_index", failed_index}};
}

std::string ReplayReport::summary() const
{
    std::ostringstream out;
    for (const auto& s : steps) {
        out << (s.passed ? "PASS" : "FAIL") << " step " << s.index << " " << s.tool;
        if (!s.detail.empty())
            out << ": " << s.detail;
        out << " (" << s.micros << " us)\n";
    }
    return out.str();
}

std::string check_expectation(const Expect& expect, const ToolResult& result)
{
    if (expect.text_contains) {
        for (const auto& item : result.content)
            if (item.kind == ContentItem::Kind::text &&
                item.data.find(*expect.text_contains) != std::string::npos)
                return {};
        return "expected text containing \"" + *expect.text_contains + "\"; got \"" +
               result.first_text() + "\"";
    }
    if (expect.numeric) {
        const auto payload = result.payload();
        if (!payload)
            return "expected a structured payload with field '" + expect.numeric->path +
                   "'; result has none";
        const json* v = find_path(*payload, expect.numeric->path);
        if (!v || !v->is_number())
            return "payload has no numeric field '" + expect.numeric->path + "'";
        const double actual = v->get<double>();
        const double expected = expect.numeric->value;
        const double tol = expect.numeric->rel_tol * std::max(std::abs(expected), 1e-300);
        if (std::abs(actual - expected) > tol)
            return "field '" + expect.numeric->path + "': expected " + format_double(expected) +
                   " +- " + format_double(100.0 * expect.numeric->rel_tol) + "%, got " +
                   format_double(actual);
        return {};
    }
    if (expect.is_error) {
        if (result.is_error != *expect.is_error)
            return std::string("expected is_error=") + (*expect.is_error ? "true" : "false") +
                   ", got " + (result.is_error ? "true" : "false") + " (" + result.first_text() +
                   ")";
        return {};
    }
    if (expect.has_image) {
        if (result.has_image() != *expect.has_image)
            return std::string("expected has_image=") + (*expect.has_image ? "true" : "false") +
                   ", got " + (result.has_image() ? "true" : "false");
        return {};
    }
    // No expectation given: the step must simply succeed.
    if (result.is_error)
        return "step failed: " + result.first_text();
    return {};
}

ReplayReport replay(const Trace& trace, mcp::McpServer& server)
{
    ReplayReport report;

    auto roundtrip = [&](const mcp::RpcRequest& request) -> json {
        const std::string line = mcp::encode_request(request);
        const auto response = server.process_line(line);
        if (!response)
            throw TraceError("server returned no response for request " + line);
        return json::parse(*response);
    };

    if (!server.initialized()) {
        mcp::RpcRequest init;
        init.id.value = std::int64_t{0};
        init.method = "initialize";
        init.params = {{"protocolVersion", mcp::McpServer::kProtocolVersion},
                       {"clientInfo", {{"name", "vizbridge-replay"}, {"version", "1"}}}};
        const json reply = roundtrip(init);
        if (reply.contains("error"))
            throw TraceError("initialize failed: " + reply["error"].dump());
    }

    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
        const TraceStep& step = trace.steps[i];

        mcp::RpcRequest request;
        request.id.value = static_cast<std::int64_t>(i + 1);
        request.method = "tools/call";
        request.params = {{"name", step.tool}, {"arguments", step.arguments}};

        const auto start = std::chrono::steady_clock::now();
        const json reply = roundtrip(request);
        const auto elapsed = std::chrono::duration<double, std::micro>(
                                 std::chrono::steady_clock::now() - start)
                                 .count();

        StepReport sr;
        sr.index = static_cast<int>(i);
        sr.tool = step.tool;
        sr.micros = elapsed;

        if (reply.contains("error")) {
            sr.passed = false;
            sr.detail = "protocol error: " + reply["error"].dump();
        } else {
            const ToolResult result = ToolResult::from_wire(reply.at("result"));
            const Expect expect = step.expect ? *step.expect : Expect{};
            sr.detail = check_expectation(expect, result);
            sr.passed = sr.detail.empty();
        }

        report.steps.push_back(sr);
        if (!sr.passed) {
            report.all_passed = false;
            report.failed_index = sr.index;
            break;  // a failed assertion halts the trace
        }
    }
    return report;
}

Trace record(const std::filesystem::path& session_log)
{
    std::ifstream in(session_log);
    if (!in)
        throw TraceError("cannot open session log " + session_log.string());

    Trace trace;
    trace.name = session_log.stem().string();

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const json entry = json::parse(line, nullptr, false);
        if (entry.is_discarded() || !entry.is_object() || !entry.contains("tool") ||
            !entry.contains("digest"))
            throw TraceError("malformed session log line " + std::to_string(line_no));

        TraceStep step;
        step.tool = entry["tool"].get<std::string>();
        step.arguments = entry.value("arguments", json::object());

        const json& digest = entry["digest"];
        Expect expect;
        if (digest.value("is_error", false)) {
            expect.is_error = true;
        } else if (digest.contains("payload") && !digest["payload"].is_null()) {
            const auto paths = numeric_leaf_paths(digest["payload"]);
            if (!paths.empty()) {
                Expect::Numeric n;
                n.path = paths.front();
                n.value = find_path(digest["payload"], n.path)->get<double>();
                n.rel_tol = 0.01;
                expect.numeric = n;
            } else if (digest.value("has_image", false)) {
                expect.has_image = true;
            } else {
                expect.is_error = false;
            }
        } else if (digest.value("has_image", false)) {
            expect.has_image = true;
        } else {
            expect.is_error = false;
        }
        step.expect = expect;
        trace.steps.push_back(std::move(step));
    }
    return trace;
}

} // namespace vizbridge
