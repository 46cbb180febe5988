#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vizbridge {

using json = nlohmann::json;

/// Extracts the first ```json fenced block from tool-result text.
std::optional<json> extract_fenced_json(const std::string& text);

/// Looks up a dotted path ("bins.0.count"); integer tokens index arrays.
/// Returns nullptr when any segment is missing.
const json* find_path(const json& root, std::string_view path);

/// Depth-first paths of all numeric leaves, object keys in sorted order.
std::vector<std::string> numeric_leaf_paths(const json& root);

/// Compact prose formatting for scalars (%.6g).
std::string format_double(double v);

} // namespace vizbridge
