#pragma once

#include "bootsplat/image.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bootsplat {

    uint8_t to_byte(double v);
    double from_byte(uint8_t b);

    // PNG, 8-bit RGB. Alpha and 16-bit inputs are reduced to 8-bit RGB on load.
    ImageBuffer load_image(const std::filesystem::path& path);
    void save_image(const ImageBuffer& img, const std::filesystem::path& path);

    std::vector<uint8_t> encode_png(const ImageBuffer& img);
    ImageBuffer decode_png(std::span<const uint8_t> bytes);

    // Standard alphabet, padded.
    std::string base64_encode(std::span<const uint8_t> bytes);
    std::vector<uint8_t> base64_decode(std::string_view text);

    std::string to_b64(const ImageBuffer& img);
    ImageBuffer from_b64(std::string_view text);

} // namespace bootsplat
