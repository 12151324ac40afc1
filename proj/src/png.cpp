#include "pixelseg/png.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "pixelseg/error.hpp"

namespace pixelseg {

namespace {

void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void write_chunk(std::ofstream& out, const char type[4], const std::vector<std::uint8_t>& data) {
  std::vector<std::uint8_t> buf;
  put_u32be(buf, static_cast<std::uint32_t>(data.size()));
  buf.insert(buf.end(), type, type + 4);
  buf.insert(buf.end(), data.begin(), data.end());
  const uLong crc = crc32(crc32(0L, reinterpret_cast<const Bytef*>(type), 4),
                          data.empty() ? nullptr : data.data(),
                          static_cast<uInt>(data.size()));
  put_u32be(buf, static_cast<std::uint32_t>(crc));
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void write_png(const std::string& path, std::size_t width, std::size_t height,
               std::uint8_t color_type, std::size_t channels,
               const std::vector<std::uint8_t>& pixels) {
  if (width == 0 || height == 0 || pixels.size() != width * height * channels) {
    throw FormatError("write_png: pixel buffer does not match " + std::to_string(width) + "x" +
                      std::to_string(height));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("write_png: cannot open " + path);

  static const std::uint8_t signature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  out.write(reinterpret_cast<const char*>(signature), 8);

  std::vector<std::uint8_t> ihdr;
  put_u32be(ihdr, static_cast<std::uint32_t>(width));
  put_u32be(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(8);           // bit depth
  ihdr.push_back(color_type);  // 0 = gray, 2 = rgb
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  write_chunk(out, "IHDR", ihdr);

  // Filter byte 0 in front of every scanline.
  std::vector<std::uint8_t> raw;
  raw.reserve(height * (1 + width * channels));
  for (std::size_t y = 0; y < height; ++y) {
    raw.push_back(0);
    const std::uint8_t* row = pixels.data() + y * width * channels;
    raw.insert(raw.end(), row, row + width * channels);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                Z_BEST_SPEED) != Z_OK) {
    throw FormatError("write_png: zlib compression failed");
  }
  compressed.resize(bound);
  write_chunk(out, "IDAT", compressed);
  write_chunk(out, "IEND", {});
  if (!out) throw FormatError("write_png: short write to " + path);
}

}  // namespace

void write_png_rgb8(const std::string& path, std::size_t width, std::size_t height,
                    const std::vector<std::uint8_t>& rgb) {
  write_png(path, width, height, 2, 3, rgb);
}

void write_png_gray8(const std::string& path, std::size_t width, std::size_t height,
                     const std::vector<std::uint8_t>& gray) {
  write_png(path, width, height, 0, 1, gray);
}

}  // namespace pixelseg
