#include "vizbridge/tool_result.hpp"

namespace vizbridge {

json ContentItem::to_wire() const
{
    if (kind == Kind::image)
        return {{"type", "image"}, {"data", data}, {"mimeType", mime}};
    return {{"type", "text"}, {"text", data}};
}

ToolResult ToolResult::text(std::string body)
{
    ToolResult r;
    r.add_text(std::move(body));
    return r;
}

ToolResult ToolResult::error(std::string message)
{
    ToolResult r;
    r.is_error = true;
    r.add_text(std::move(message));
    return r;
}

void ToolResult::add_text(std::string body)
{
    content.push_back({ContentItem::Kind::text, std::move(body), {}});
}

void ToolResult::add_image(std::string base64_data, std::string mime)
{
    content.push_back({ContentItem::Kind::image, std::move(base64_data), std::move(mime)});
}

bool ToolResult::has_image() const
{
    for (const auto& item : content)
        if (item.kind == ContentItem::Kind::image)
            return true;
    return false;
}

std::string ToolResult::first_text() const
{
    for (const auto& item : content)
        if (item.kind == ContentItem::Kind::text)
            return item.data;
    return {};
}

std::optional<json> ToolResult::payload() const
{
    for (const auto& item : content) {
        if (item.kind != ContentItem::Kind::text)
            continue;
        if (auto block = extract_fenced_json(item.data))
            return block;
    }
    return std::nullopt;
}

json ToolResult::to_wire() const
{
    json items = json::array();
    for (const auto& item : content)
        items.push_back(item.to_wire());
    return {{"content", items}, {"isError", is_error}};
}

ToolResult ToolResult::from_wire(const json& j)
{
    ToolResult r;
    r.is_error = j.value("isError", false);
    for (const auto& item : j.value("content", json::array())) {
        const std::string type = item.value("type", "");
        if (type == "image")
            r.add_image(item.value("data", ""), item.value("mimeType", ""));
        else
            r.add_text(item.value("text", ""));
    }
    return r;
}

} // namespace vizbridge
