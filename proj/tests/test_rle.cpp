#include <random>

#include "doctest.h"
#include "pixelseg/rle.hpp"

using namespace pixelseg;

TEST_CASE("rle fixtures") {
  SUBCASE("all zeros") {
    BinaryMask m = BinaryMask::zeros(2, 2);
    RleMask rle = rle_encode(m);
    CHECK(rle.counts == std::vector<std::uint64_t>{4});
  }
  SUBCASE("all ones keeps the leading zero run") {
    BinaryMask m = BinaryMask::zeros(2, 2);
    for (auto& v : m.data) v = 1;
    RleMask rle = rle_encode(m);
    CHECK(rle.counts == std::vector<std::uint64_t>{0, 4});
  }
  SUBCASE("column-major order") {
    // Mask rows: (1 0 / 0 0): column-major scan is 1,0,0,0.
    BinaryMask m = BinaryMask::zeros(2, 2);
    m.at(0, 0) = 1;
    CHECK(rle_encode(m).counts == std::vector<std::uint64_t>{0, 1, 3});
  }
}

TEST_CASE("rle round trip on random masks") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t h = 1 + rng() % 12, w = 1 + rng() % 12;
    BinaryMask m = BinaryMask::zeros(h, w);
    for (auto& v : m.data) v = rng() % 2;
    const RleMask rle = rle_encode(m);
    std::uint64_t sum = 0;
    for (std::uint64_t c : rle.counts) sum += c;
    CHECK(sum == h * w);
    CHECK(rle_decode(rle) == m);
  }
}

TEST_CASE("rle decode validates the count sum") {
  CHECK_THROWS_AS(rle_decode(RleMask{2, 2, {3}}), FormatError);
  CHECK_THROWS_AS(rle_decode(RleMask{2, 2, {5}}), FormatError);
}
