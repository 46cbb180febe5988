#pragma once

#include "vizbridge/tool_registry.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

namespace vizbridge::mcp {

/// JSON-RPC 2.0 request id: absent (notification), number, or string.
struct RpcId {
    std::variant<std::monostate, std::int64_t, std::string> value;

    bool is_null() const { return std::holds_alternative<std::monostate>(value); }
    json to_json() const;
    bool operator==(const RpcId&) const = default;
};

struct RpcRequest {
    RpcId id;
    std::string method;
    json params = json::object();

    bool is_notification() const { return id.is_null(); }
};

/// Malformed traffic. Protocol error codes (-327xx) are reserved for these;
/// tool and engine failures travel in-band as is_error ToolResults.
class ProtocolError : public std::runtime_error {
public:
    ProtocolError(int code, const std::string& message)
        : std::runtime_error(message), code_(code)
    {
    }
    int code() const { return code_; }

private:
    int code_;
};

constexpr int kParseError = -32700;
constexpr int kInvalidRequest = -32600;
constexpr int kMethodNotFound = -32601;
constexpr int kInvalidParams = -32602;
constexpr int kNotInitialized = -32002;

/// Parses one newline-delimited message. Throws ProtocolError -32700 for
/// malformed JSON and -32600 for valid JSON that is not a JSON-RPC request.
RpcRequest decode_message(const std::string& line);

/// Wire form of a request (used by the replay harness and round-trip tests).
std::string encode_request(const RpcRequest& request);

/// The MCP server: capability handshake, tool listing, and tool invocation
/// dispatch over newline-delimited JSON-RPC. Single-threaded; requests are
/// processed strictly in arrival order.
class McpServer {
public:
    static constexpr const char* kProtocolVersion = "2024-11-05";
    static constexpr const char* kServerName = "vizbridge-mcp";
    static constexpr const char* kServerVersion = "0.1.0";

    explicit McpServer(ToolRegistry& registry);

    /// Handles one wire line: decode, dispatch, encode. Returns the response
    /// line (without trailing newline), or nullopt for notifications and
    /// whitespace-only input. Never throws.
    std::optional<std::string> process_line(const std::string& line);

    /// Reads messages until EOF, writing one response line per request and
    /// flushing after each write. Per-message failures never abort the loop.
    void run_serve_loop(std::istream& in, std::ostream& out);

    /// Diagnostics sink (never stdout). Null disables logging.
    void set_log(std::ostream* log) { log_ = log; }

    bool initialized() const { return initialized_; }

private:
    json dispatch(const RpcRequest& request);  // result object, or throws ProtocolError
    json handle_initialize(const json& params);
    json handle_tools_list() const;
    json handle_tools_call(const json& params);
    void log(const std::string& message);

    ToolRegistry& registry_;
    std::ostream* log_ = nullptr;
    bool initialized_ = false;
};

} // namespace vizbridge::mcp
