#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pixelseg {

// Minimal PNG writers (8-bit, zlib-compressed, no interlacing).
void write_png_rgb8(const std::string& path, std::size_t width, std::size_t height,
                    const std::vector<std::uint8_t>& rgb);
void write_png_gray8(const std::string& path, std::size_t width, std::size_t height,
                     const std::vector<std::uint8_t>& gray);

}  // namespace pixelseg
