#include "vizbridge/mcp_server.hpp"

#include <istream>
#include <ostream>

namespace vizbridge::mcp {

namespace {

bool whitespace_only(const std::string& line)
{
    return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

json error_response(const RpcId& id, int code, const std::string& message)
{
    return {{"jsonrpc", "2.0"},
            {"id", id.to_json()},
            {"error", {{"code", code}, {"message", message}}}};
}

json success_response(const RpcId& id, json result)
{
    return {{"jsonrpc", "2.0"}, {"id", id.to_json()}, {"result", std::move(result)}};
}

} // namespace

json RpcId::to_json() const
{
    if (auto* n = std::get_if<std::int64_t>(&value))
        return *n;
    if (auto* s = std::get_if<std::string>(&value))
        return *s;
    return nullptr;
}

RpcRequest decode_message(const std::string& line)
{
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
        throw ProtocolError(kParseError, "parse error: invalid JSON");
    if (!j.is_object())
        throw ProtocolError(kInvalidRequest, "invalid request: expected a JSON object");
    if (j.value("jsonrpc", "") != "2.0")
        throw ProtocolError(kInvalidRequest, "invalid request: jsonrpc must be \"2.0\"");
    if (!j.contains("method") || !j["method"].is_string())
        throw ProtocolError(kInvalidRequest, "invalid request: missing method");

    RpcRequest request;
    request.method = j["method"].get<std::string>();

    if (j.contains("id") && !j["id"].is_null()) {
        const json& id = j["id"];
        if (id.is_number_integer())
            request.id.value = id.get<std::int64_t>();
        else if (id.is_string())
            request.id.value = id.get<std::string>();
        else
            throw ProtocolError(kInvalidRequest, "invalid request: id must be a number or string");
    }

    if (j.contains("params")) {
        if (!j["params"].is_object() && !j["params"].is_null())
            throw ProtocolError(kInvalidRequest, "invalid request: params must be an object");
        if (j["params"].is_object())
            request.params = j["params"];
    }
    return request;
}

std::string encode_request(const RpcRequest& request)
{
    json j{{"jsonrpc", "2.0"}, {"method", request.method}};
    if (!request.id.is_null())
        j["id"] = request.id.to_json();
    if (!request.params.empty())
        j["params"] = request.params;
    return j.dump();
}

McpServer::McpServer(ToolRegistry& registry) : registry_(registry) {}

void McpServer::log(const std::string& message)
{
    if (log_ != nullptr)
        *log_ << "[" << iso8601_now() << "] " << message << "\n" << std::flush;
}

std::optional<std::string> McpServer::process_line(const std::string& line)
{
    if (whitespace_only(line))
        return std::nullopt;

    RpcRequest request;
    try {
        request = decode_message(line);
    } catch (const ProtocolError& e) {
        log(std::string("protocol error: ") + e.what());
        return error_response(RpcId{}, e.code(), e.what()).dump();
    } catch (const std::exception& e) {
        return error_response(RpcId{}, kParseError, e.what()).dump();
    }

    if (request.is_notification()) {
        // notifications/initialized and notifications/cancelled are the only
        // expected ones; all are acknowledged silently.
        log("notification: " + request.method);
        return std::nullopt;
    }

    log("request: " + request.method);
    try {
        return success_response(request.id, dispatch(request)).dump();
    } catch (const ProtocolError& e) {
        return error_response(request.id, e.code(), e.what()).dump();
    } catch (const std::exception& e) {
        return error_response(request.id, -32603, std::string("internal error: ") + e.what())
            .dump();
    }
}

json McpServer::dispatch(const RpcRequest& request)
{
    if (request.method == "initialize")
        return handle_initialize(request.params);
    if (request.method == "ping")
        return json::object();
    if (request.method == "tools/list") {
        if (!initialized_)
            throw ProtocolError(kNotInitialized, "server not initialized");
        return handle_tools_list();
    }
    if (request.method == "tools/call") {
        if (!initialized_)
            throw ProtocolError(kNotInitialized, "server not initialized");
        return handle_tools_call(request.params);
    }
    throw ProtocolError(kMethodNotFound, "method not found: " + request.method);
}

json McpServer::handle_initialize(const json& params)
{
    if (initialized_)
        throw ProtocolError(kInvalidRequest, "session already initialized");

    const std::string requested = params.value("protocolVersion", "");
    if (!requested.empty() && requested != kProtocolVersion)
        throw ProtocolError(kInvalidParams,
                            std::string("unsupported protocol version '") + requested +
                                "'; this server implements " + kProtocolVersion);

    initialized_ = true;
    return {{"protocolVersion", kProtocolVersion},
            {"capabilities", {{"tools", json::object()}}},
            {"serverInfo", {{"name", kServerName}, {"version", kServerVersion}}}};
}

json McpServer::handle_tools_list() const
{
    json tools = json::array();
    for (const auto& d : registry_.descriptors())
        tools.push_back(d.to_json());
    return {{"tools", tools}};
}

json McpServer::handle_tools_call(const json& params)
{
    // Everything below the valid envelope is agent-recoverable data, so even
    // a missing tool name comes back as an is_error result.
    if (!params.contains("name") || !params["name"].is_string())
        return ToolResult::error("missing tool name").to_wire();
    const json arguments = params.value("arguments", json::object());
    ToolResult result = registry_.call(params["name"].get<std::string>(), arguments);
    return result.to_wire();
}

void McpServer::run_serve_loop(std::istream& in, std::ostream& out)
{
    std::string line;
    while (std::getline(in, line)) {
        if (auto response = process_line(line)) {
            out << *response << "\n";
            out.flush();
        }
    }
    log("EOF; shutting down");
}

} // namespace vizbridge::mcp
