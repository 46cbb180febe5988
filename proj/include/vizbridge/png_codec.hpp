#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace vizbridge::png {

/// 8-bit RGB raster plus optional tEXt metadata.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;                // width*height*3, row-major, top row first
    std::map<std::string, std::string> text;      // tEXt chunks (keyword -> value)
};

class CodecError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Encodes a non-interlaced 8-bit RGB PNG. Output is byte-deterministic for
/// equal input (fixed zlib level, fixed chunk order).
std::vector<std::uint8_t> encode(const Image& image);

/// Decodes PNGs produced by encode() (color type 2, bit depth 8, filter 0).
Image decode(const std::vector<std::uint8_t>& bytes);

} // namespace vizbridge::png
