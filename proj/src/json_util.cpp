#include "vizbridge/json_util.hpp"

#include <cstdio>

namespace vizbridge {

std::optional<json> extract_fenced_json(const std::string& text)
{
    const std::string open = "```json";
    const auto start = text.find(open);
    if (start == std::string::npos)
        return std::nullopt;
    const auto body = start + open.size();
    const auto end = text.find("```", body);
    if (end == std::string::npos)
        return std::nullopt;
    json parsed = json::parse(text.substr(body, end - body), nullptr, false);
    if (parsed.is_discarded())
        return std::nullopt;
    return std::optional<json>(std::move(parsed));
}

const json* find_path(const json& root, std::string_view path)
{
    const json* node = &root;
    std::size_t pos = 0;
    while (pos <= path.size()) {
        const auto dot = path.find('.', pos);
        const std::string_view token =
            path.substr(pos, dot == std::string_view::npos ? std::string_view::npos : dot - pos);
        if (token.empty())
            return nullptr;
        if (node->is_object()) {
            const auto it = node->find(std::string(token));
            if (it == node->end())
                return nullptr;
            node = &*it;
        } else if (node->is_array()) {
            std::size_t idx = 0;
            for (char c : token) {
                if (c < '0' || c > '9')
                    return nullptr;
                idx = idx * 10 + static_cast<std::size_t>(c - '0');
            }
            if (idx >= node->size())
                return nullptr;
            node = &(*node)[idx];
        } else {
            return nullptr;
        }
        if (dot == std::string_view::npos)
            break;
        pos = dot + 1;
    }
    return node;
}

namespace {
void collect_numeric(const json& node, const std::string& prefix, std::vector<std::string>& out)
{
    if (node.is_number()) {
        out.push_back(prefix);
        return;
    }
    if (node.is_object()) {
        // nlohmann::json objects iterate in sorted key order already
        for (auto it = node.begin(); it != node.end(); ++it)
            collect_numeric(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    } else if (node.is_array()) {
        for (std::size_t i = 0; i < node.size(); ++i)
            collect_numeric(node[i],
                            prefix.empty() ? std::to_string(i) : prefix + "." + std::to_string(i),
                            out);
    }
}
} // namespace

std::vector<std::string> numeric_leaf_paths(const json& root)
{
    std::vector<std::string> out;
    collect_numeric(root, "", out);
    return out;
}

std::string format_double(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

} // namespace vizbridge
