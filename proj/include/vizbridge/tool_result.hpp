#pragma once

#include "vizbridge/json_util.hpp"

#include <optional>
#include <string>
#include <vector>

namespace vizbridge {

/// What a tool call hands back to the agent: an ordered list of text and
/// image items. Tool failures are data (is_error=true plus a diagnostic
/// text item), never protocol errors.
struct ContentItem {
    enum class Kind { text, image };
    Kind kind = Kind::text;
    std::string data;  // text body, or base64 payload for images
    std::string mime;  // images only

    json to_wire() const;
};

struct ToolResult {
    std::vector<ContentItem> content;
    bool is_error = false;

    static ToolResult text(std::string body);
    static ToolResult error(std::string message);

    void add_text(std::string body);
    void add_image(std::string base64_data, std::string mime = "image/png");

    bool has_image() const;
    std::string first_text() const;
    /// First ```json fenced block across the text items (the structured
    /// payload that rides along with the prose).
    std::optional<json> payload() const;

    json to_wire() const;
    static ToolResult from_wire(const json& j);
};

} // namespace vizbridge
