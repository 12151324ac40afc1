#pragma once

#include <cstdint>
#include <vector>

#include "pixelseg/tensor.hpp"

namespace pixelseg {

// Row-major 0/1 mask for matching, metrics and record I/O.
struct BinaryMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> data;

  static BinaryMask zeros(std::size_t h, std::size_t w) {
    return BinaryMask{h, w, std::vector<std::uint8_t>(h * w, 0)};
  }
  std::size_t size() const { return data.size(); }
  std::size_t area() const {
    std::size_t n = 0;
    for (std::uint8_t v : data) n += v ? 1 : 0;
    return n;
  }
  std::uint8_t& at(std::size_t y, std::size_t x) { return data[y * width + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return data[y * width + x]; }
  bool operator==(const BinaryMask& other) const = default;
};

// Thresholds a probability/score map at `threshold` (>=).
BinaryMask binarize(const Tensor& t, double threshold);

std::size_t mask_intersection(const BinaryMask& a, const BinaryMask& b);
std::size_t mask_union(const BinaryMask& a, const BinaryMask& b);

}  // namespace pixelseg
