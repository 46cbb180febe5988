#include "vizbridge/png_codec.hpp"

#include <zlib.h>

#include <cstring>

namespace vizbridge::png {

namespace {

constexpr std::uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t read_u32(const std::uint8_t* p)
{
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
           std::uint32_t(p[3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& payload)
{
    put_u32(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    const uLong crc = ::crc32(0L, out.data() + crc_start, static_cast<uInt>(4 + payload.size()));
    put_u32(out, static_cast<std::uint32_t>(crc));
}

} // namespace

std::vector<std::uint8_t> encode(const Image& image)
{
    if (image.width <= 0 || image.height <= 0)
        throw CodecError("png: empty image");
    const std::size_t expected = static_cast<std::size_t>(image.width) * image.height * 3;
    if (image.rgb.size() != expected)
        throw CodecError("png: pixel buffer size mismatch");

    std::vector<std::uint8_t> out;
    out.insert(out.end(), kSignature, kSignature + 8);

    std::vector<std::uint8_t> ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(image.width));
    put_u32(ihdr, static_cast<std::uint32_t>(image.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type: truecolor RGB
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter method
    ihdr.push_back(0);  // no interlace
    append_chunk(out, "IHDR", ihdr);

    for (const auto& [key, value] : image.text) {
        std::vector<std::uint8_t> payload(key.begin(), key.end());
        payload.push_back(0);
        payload.insert(payload.end(), value.begin(), value.end());
        append_chunk(out, "tEXt", payload);
    }

    // Scanlines with filter byte 0 (None) per row.
    const std::size_t stride = static_cast<std::size_t>(image.width) * 3;
    std::vector<std::uint8_t> raw;
    raw.reserve((stride + 1) * image.height);
    for (int y = 0; y < image.height; ++y) {
        raw.push_back(0);
        const std::uint8_t* row = image.rgb.data() + static_cast<std::size_t>(y) * stride;
        raw.insert(raw.end(), row, row + stride);
    }

    uLongf bound = ::compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> idat(bound);
    if (::compress2(idat.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw CodecError("png: deflate failed");
    idat.resize(bound);
    append_chunk(out, "IDAT", idat);

    append_chunk(out, "IEND", {});
    return out;
}

Image decode(const std::vector<std::uint8_t>& bytes)
{
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0)
        throw CodecError("png: bad signature");

    Image image;
    std::vector<std::uint8_t> idat;
    std::size_t pos = 8;
    bool saw_ihdr = false;

    while (pos + 8 <= bytes.size()) {
        const std::uint32_t len = read_u32(bytes.data() + pos);
        if (pos + 12 + len > bytes.size())
            throw CodecError("png: truncated chunk");
        const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
        const std::uint8_t* payload = bytes.data() + pos + 8;

        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13)
                throw CodecError("png: bad IHDR");
            image.width = static_cast<int>(read_u32(payload));
            image.height = static_cast<int>(read_u32(payload + 4));
            if (payload[8] != 8 || payload[9] != 2 || payload[12] != 0)
                throw CodecError("png: unsupported format (expect 8-bit RGB, no interlace)");
            saw_ihdr = true;
        } else if (std::memcmp(type, "tEXt", 4) == 0) {
            const std::uint8_t* sep = static_cast<const std::uint8_t*>(std::memchr(payload, 0, len));
            if (sep == nullptr)
                throw CodecError("png: malformed tEXt");
            image.text.emplace(std::string(payload, sep),
                               std::string(sep + 1, payload + len));
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }

    if (!saw_ihdr || image.width <= 0 || image.height <= 0)
        throw CodecError("png: missing IHDR");

    const std::size_t stride = static_cast<std::size_t>(image.width) * 3;
    const std::size_t raw_size = (stride + 1) * image.height;
    std::vector<std::uint8_t> raw(raw_size);
    uLongf dest_len = static_cast<uLongf>(raw_size);
    if (::uncompress(raw.data(), &dest_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        dest_len != raw_size)
        throw CodecError("png: inflate failed");

    image.rgb.resize(stride * image.height);
    for (int y = 0; y < image.height; ++y) {
        const std::uint8_t* line = raw.data() + static_cast<std::size_t>(y) * (stride + 1);
        if (line[0] != 0)
            throw CodecError("png: unsupported scanline filter");
        std::memcpy(image.rgb.data() + static_cast<std::size_t>(y) * stride, line + 1, stride);
    }
    return image;
}

} // namespace vizbridge::png
