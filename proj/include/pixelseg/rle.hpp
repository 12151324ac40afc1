#pragma once

#include <cstdint>
#include <vector>

#include "pixelseg/mask.hpp"

namespace pixelseg {

// COCO-convention uncompressed run-length encoding: runs alternate 0s then
// 1s over the mask read in column-major order, so the first count is the
// leading zero run (possibly 0).
struct RleMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint64_t> counts;
  bool operator==(const RleMask& other) const = default;
};

RleMask rle_encode(const BinaryMask& mask);

// Counts must sum to height*width or a FormatError is raised.
BinaryMask rle_decode(const RleMask& rle);

}  // namespace pixelseg
