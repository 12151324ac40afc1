#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "pixelseg/mask.hpp"
#include "pixelseg/records.hpp"
#include "pixelseg/tensor.hpp"

namespace pixelseg {

enum class ShapeKind { kRectangle, kEllipse };

struct ShapeInstance {
  ShapeKind kind = ShapeKind::kRectangle;
  // Rectangle: pixel box [x0,x1) x [y0,y1). Ellipse: center and radii,
  // evaluated at pixel centers.
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double cx = 0, cy = 0, rx = 0, ry = 0;
  std::array<double, 3> color = {0, 0, 0};
  std::string color_name;
};

struct SceneTarget {
  ShapeInstance shape;
  BinaryMask mask;  // visible pixels after depth resolution
  std::string description;
  std::string category;
  std::array<std::int64_t, 4> bbox = {0, 0, 0, 0};
  std::vector<double> attributes;  // query for the target embedder
};

struct SyntheticScene {
  Tensor image;  // (3, size, size), values in [0,1]
  std::vector<SceneTarget> targets;
  std::string question;
  std::string answer;
};

struct SyntheticConfig {
  std::size_t image_size = 64;
  std::size_t min_targets = 1;
  std::size_t max_targets = 4;
  double min_extent = 14.0;  // shape diameter range, pixels
  double max_extent = 30.0;
  double max_overlap = 0.4;  // fraction of a shape another may claim
  std::size_t max_retries = 100;
};

// Attribute layout: [is_rect, is_ellipse, r, g, b, cx/size, cy/size].
inline constexpr std::size_t kAttributeDim = 7;

// Deterministic rendering of a fixed shape list: later shapes sit on top and
// own the pixels they cover, so masks partition the claimed area.
SyntheticScene render_scene(const std::vector<ShapeInstance>& shapes, std::size_t image_size);

std::vector<SyntheticScene> gen_synthetic(const SyntheticConfig& config, std::uint64_t seed,
                                          std::size_t count);

MuseRecord scene_to_record(const SyntheticScene& scene, const std::string& image_name);

// 8-bit image export of the rendered scene, row-major RGB.
std::vector<std::uint8_t> scene_to_rgb8(const SyntheticScene& scene);

Tensor mask_to_tensor(const BinaryMask& mask);

}  // namespace pixelseg
