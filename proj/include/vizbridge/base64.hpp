#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vizbridge {

/// RFC 4648 base64 (with padding).
std::string base64_encode(const std::vector<std::uint8_t>& data);

/// Decodes base64; throws std::invalid_argument on non-alphabet input or bad padding.
std::vector<std::uint8_t> base64_decode(const std::string& text);

} // namespace vizbridge
