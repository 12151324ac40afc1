#include "pixelseg/rle.hpp"

#include "pixelseg/error.hpp"

namespace pixelseg {

RleMask rle_encode(const BinaryMask& mask) {
  RleMask rle;
  rle.height = mask.height;
  rle.width = mask.width;
  std::uint8_t current = 0;  // zero run first
  std::uint64_t run = 0;
  for (std::size_t x = 0; x < mask.width; ++x) {
    for (std::size_t y = 0; y < mask.height; ++y) {
      const std::uint8_t v = mask.at(y, x) ? 1 : 0;
      if (v == current) {
        ++run;
      } else {
        rle.counts.push_back(run);
        current = v;
        run = 1;
      }
    }
  }
  rle.counts.push_back(run);
  return rle;
}

BinaryMask rle_decode(const RleMask& rle) {
  const std::uint64_t total = static_cast<std::uint64_t>(rle.height) * rle.width;
  std::uint64_t sum = 0;
  for (std::uint64_t c : rle.counts) sum += c;
  if (sum != total) {
    throw FormatError("rle_decode: counts sum to " + std::to_string(sum) + ", expected " +
                      std::to_string(total));
  }
  BinaryMask mask = BinaryMask::zeros(rle.height, rle.width);
  std::size_t idx = 0;
  std::uint8_t value = 0;
  for (std::uint64_t c : rle.counts) {
    for (std::uint64_t i = 0; i < c; ++i, ++idx) {
      const std::size_t x = idx / rle.height;
      const std::size_t y = idx % rle.height;
      mask.at(y, x) = value;
    }
    value = 1 - value;
  }
  return mask;
}

}  // namespace pixelseg
