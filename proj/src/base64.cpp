#include "vizbridge/base64.hpp"

#include <array>
#include <stdexcept>

namespace vizbridge {

namespace {
constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::array<int, 256> decode_table()
{
    std::array<int, 256> t{};
    t.fill(-1);
    for (int i = 0; i < 64; ++i)
        t[static_cast<unsigned char>(kAlphabet[i])] = i;
    return t;
}
} // namespace

std::string base64_encode(const std::vector<std::uint8_t>& data)
{
    std::string out;
    out.reserve(((data.size() + 2) / 3) * 4);

    std::size_t i = 0;
    while (i + 2 < data.size()) {
        unsigned triple = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
        out.push_back(kAlphabet[(triple >> 18) & 0x3F]);
        out.push_back(kAlphabet[(triple >> 12) & 0x3F]);
        out.push_back(kAlphabet[(triple >> 6) & 0x3F]);
        out.push_back(kAlphabet[triple & 0x3F]);
        i += 3;
    }
    if (i < data.size()) {
        unsigned triple = data[i] << 16;
        const bool two = i + 1 < data.size();
        if (two)
            triple |= data[i + 1] << 8;
        out.push_back(kAlphabet[(triple >> 18) & 0x3F]);
        out.push_back(kAlphabet[(triple >> 12) & 0x3F]);
        out.push_back(two ? kAlphabet[(triple >> 6) & 0x3F] : '=');
        out.push_back('=');
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text)
{
    static const std::array<int, 256> table = decode_table();

    if (text.size() % 4 != 0)
        throw std::invalid_argument("base64: length not a multiple of 4");

    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);

    for (std::size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            const char c = text[i + k];
            if (c == '=') {
                if (i + 4 != text.size() || k < 2)
                    throw std::invalid_argument("base64: misplaced padding");
                ++pad;
                vals[k] = 0;
                continue;
            }
            if (pad > 0)
                throw std::invalid_argument("base64: data after padding");
            const int v = table[static_cast<unsigned char>(c)];
            if (v < 0)
                throw std::invalid_argument("base64: invalid character");
            vals[k] = v;
        }
        const unsigned triple = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
        out.push_back(static_cast<std::uint8_t>((triple >> 16) & 0xFF));
        if (pad < 2)
            out.push_back(static_cast<std::uint8_t>((triple >> 8) & 0xFF));
        if (pad < 1)
            out.push_back(static_cast<std::uint8_t>(triple & 0xFF));
    }
    return out;
}

} // namespace vizbridge
