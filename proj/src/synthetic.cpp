#include "pixelseg/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "pixelseg/error.hpp"
#include "pixelseg/eval.hpp"

namespace pixelseg {

namespace {

constexpr std::array<double, 3> kBackground = {0.12, 0.12, 0.14};

struct PaletteEntry {
  const char* name;
  std::array<double, 3> rgb;
};

constexpr PaletteEntry kPalette[] = {
    {"red", {0.85, 0.10, 0.10}},    {"green", {0.10, 0.75, 0.15}},
    {"blue", {0.15, 0.25, 0.90}},   {"yellow", {0.95, 0.85, 0.10}},
    {"magenta", {0.85, 0.15, 0.80}}, {"cyan", {0.10, 0.80, 0.85}},
    {"orange", {0.95, 0.55, 0.10}}, {"white", {0.95, 0.95, 0.95}},
};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

// Span rasterization into the owner grid; later shapes overwrite.
void rasterize(const ShapeInstance& s, std::size_t size, std::vector<int>& owner, int id) {
  if (s.kind == ShapeKind::kRectangle) {
    const std::size_t y0 = static_cast<std::size_t>(std::max(0.0, s.y0));
    const std::size_t y1 = std::min(size, static_cast<std::size_t>(std::max(0.0, s.y1)));
    const std::size_t x0 = static_cast<std::size_t>(std::max(0.0, s.x0));
    const std::size_t x1 = std::min(size, static_cast<std::size_t>(std::max(0.0, s.x1)));
    for (std::size_t y = y0; y < y1; ++y) {
      for (std::size_t x = x0; x < x1; ++x) owner[y * size + x] = id;
    }
  } else {
    for (std::size_t y = 0; y < size; ++y) {
      const double dy = (static_cast<double>(y) + 0.5 - s.cy) / s.ry;
      if (dy * dy > 1.0) continue;
      const double half = s.rx * std::sqrt(1.0 - dy * dy);
      const double lo = s.cx - half - 0.5, hi = s.cx + half - 0.5;
      const std::int64_t xs = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(lo)));
      const std::int64_t xe =
          std::min<std::int64_t>(static_cast<std::int64_t>(size) - 1,
                                 static_cast<std::int64_t>(std::floor(hi)));
      for (std::int64_t x = xs; x <= xe; ++x) owner[y * size + static_cast<std::size_t>(x)] = id;
    }
  }
}

std::pair<double, double> shape_center(const ShapeInstance& s) {
  if (s.kind == ShapeKind::kRectangle) return {(s.x0 + s.x1) / 2.0, (s.y0 + s.y1) / 2.0};
  return {s.cx, s.cy};
}

std::string position_phrase(double cx, double cy, std::size_t size) {
  const auto third = [&](double v) {
    const double f = v / static_cast<double>(size);
    return f < 1.0 / 3.0 ? 0 : (f < 2.0 / 3.0 ? 1 : 2);
  };
  static const char* kPhrases[3][3] = {
      {"in the upper left", "at the top", "in the upper right"},
      {"on the left", "in the center", "on the right"},
      {"in the lower left", "at the bottom", "in the lower right"},
  };
  return kPhrases[third(cy)][third(cx)];
}

std::array<std::int64_t, 4> mask_bbox(const BinaryMask& mask) {
  std::int64_t xmin = static_cast<std::int64_t>(mask.width), ymin = static_cast<std::int64_t>(mask.height);
  std::int64_t xmax = -1, ymax = -1;
  for (std::size_t y = 0; y < mask.height; ++y) {
    for (std::size_t x = 0; x < mask.width; ++x) {
      if (!mask.at(y, x)) continue;
      xmin = std::min<std::int64_t>(xmin, static_cast<std::int64_t>(x));
      xmax = std::max<std::int64_t>(xmax, static_cast<std::int64_t>(x));
      ymin = std::min<std::int64_t>(ymin, static_cast<std::int64_t>(y));
      ymax = std::max<std::int64_t>(ymax, static_cast<std::int64_t>(y));
    }
  }
  if (xmax < 0) return {0, 0, 0, 0};
  return {xmin, ymin, xmax - xmin + 1, ymax - ymin + 1};
}

}  // namespace

SyntheticScene render_scene(const std::vector<ShapeInstance>& shapes, std::size_t image_size) {
  if (image_size == 0) throw ContractError("render_scene: empty canvas");
  std::vector<int> owner(image_size * image_size, -1);
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    rasterize(shapes[k], image_size, owner, static_cast<int>(k));
  }

  SyntheticScene scene;
  scene.image = Tensor::zeros({3, image_size, image_size});
  const std::size_t plane = image_size * image_size;
  for (std::size_t p = 0; p < plane; ++p) {
    const std::array<double, 3>& rgb =
        owner[p] < 0 ? kBackground : shapes[static_cast<std::size_t>(owner[p])].color;
    for (std::size_t c = 0; c < 3; ++c) scene.image.data()[c * plane + p] = rgb[c];
  }

  for (std::size_t k = 0; k < shapes.size(); ++k) {
    const ShapeInstance& s = shapes[k];
    SceneTarget target;
    target.shape = s;
    target.mask = BinaryMask::zeros(image_size, image_size);
    for (std::size_t p = 0; p < plane; ++p) {
      target.mask.data[p] = owner[p] == static_cast<int>(k) ? 1 : 0;
    }
    target.category = s.kind == ShapeKind::kRectangle ? "rectangle" : "ellipse";
    const auto [cx, cy] = shape_center(s);
    target.description =
        "a " + s.color_name + " " + target.category + " " + position_phrase(cx, cy, image_size);
    target.bbox = mask_bbox(target.mask);
    target.attributes = {s.kind == ShapeKind::kRectangle ? 1.0 : 0.0,
                         s.kind == ShapeKind::kEllipse ? 1.0 : 0.0,
                         s.color[0],
                         s.color[1],
                         s.color[2],
                         cx / static_cast<double>(image_size),
                         cy / static_cast<double>(image_size)};
    scene.targets.push_back(std::move(target));
  }

  std::string question = "Please segment the ";
  std::string answer;
  for (std::size_t k = 0; k < scene.targets.size(); ++k) {
    if (k) {
      question += ", ";
      answer += ", ";
    }
    question += scene.targets[k].description;
    answer += scene.targets[k].description + " is " + kMaskPlaceholder;
  }
  question += " in the image";
  scene.question = question;
  scene.answer = answer;
  return scene;
}

namespace {

std::vector<ShapeInstance> sample_shapes(const SyntheticConfig& config, std::mt19937_64& rng) {
  const std::size_t size = config.image_size;
  std::uniform_int_distribution<std::size_t> k_dist(config.min_targets, config.max_targets);
  std::uniform_real_distribution<double> extent(config.min_extent, config.max_extent);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::size_t k = k_dist(rng);
  std::vector<std::size_t> palette_ids(kPaletteSize);
  for (std::size_t i = 0; i < kPaletteSize; ++i) palette_ids[i] = i;
  std::shuffle(palette_ids.begin(), palette_ids.end(), rng);

  std::vector<ShapeInstance> shapes;
  std::vector<int> owner(size * size, -1);
  std::vector<std::size_t> visible(k, 0);
  for (std::size_t idx = 0; idx < k; ++idx) {
    bool placed = false;
    for (std::size_t attempt = 0; attempt < config.max_retries && !placed; ++attempt) {
      ShapeInstance s;
      s.kind = unit(rng) < 0.5 ? ShapeKind::kRectangle : ShapeKind::kEllipse;
      const double w = extent(rng), h = extent(rng);
      if (s.kind == ShapeKind::kRectangle) {
        s.x0 = std::floor(unit(rng) * (static_cast<double>(size) - w));
        s.y0 = std::floor(unit(rng) * (static_cast<double>(size) - h));
        s.x1 = s.x0 + std::floor(w);
        s.y1 = s.y0 + std::floor(h);
      } else {
        s.rx = w / 2.0;
        s.ry = h / 2.0;
        s.cx = s.rx + unit(rng) * (static_cast<double>(size) - 2.0 * s.rx);
        s.cy = s.ry + unit(rng) * (static_cast<double>(size) - 2.0 * s.ry);
      }
      const PaletteEntry& color = kPalette[palette_ids[idx]];
      s.color = color.rgb;
      s.color_name = color.name;

      std::vector<int> trial = owner;
      rasterize(s, size, trial, static_cast<int>(idx));
      std::size_t candidate_area = 0, claimed_overlap = 0;
      std::vector<std::size_t> remaining(idx, 0);
      for (std::size_t p = 0; p < trial.size(); ++p) {
        if (trial[p] == static_cast<int>(idx)) {
          ++candidate_area;
          if (owner[p] >= 0) ++claimed_overlap;
        } else if (trial[p] >= 0) {
          ++remaining[static_cast<std::size_t>(trial[p])];
        }
      }
      if (candidate_area == 0) continue;
      if (static_cast<double>(claimed_overlap) >
          config.max_overlap * static_cast<double>(candidate_area)) {
        continue;
      }
      bool earlier_ok = true;
      for (std::size_t j = 0; j < idx; ++j) {
        const std::size_t taken = visible[j] - remaining[j];
        if (static_cast<double>(taken) > config.max_overlap * static_cast<double>(visible[j])) {
          earlier_ok = false;
          break;
        }
      }
      if (!earlier_ok) continue;

      owner = std::move(trial);
      for (std::size_t j = 0; j < idx; ++j) visible[j] = remaining[j];
      visible[idx] = candidate_area;
      shapes.push_back(std::move(s));
      placed = true;
    }
    if (!placed) {
      throw GenerationError("gen_synthetic: placement failed after " +
                            std::to_string(config.max_retries) + " retries");
    }
  }
  return shapes;
}

}  // namespace

std::vector<SyntheticScene> gen_synthetic(const SyntheticConfig& config, std::uint64_t seed,
                                          std::size_t count) {
  if (config.image_size == 0 || config.min_targets == 0 ||
      config.min_targets > config.max_targets || config.max_targets > kPaletteSize) {
    throw ContractError("gen_synthetic: invalid target range (palette holds " +
                        std::to_string(kPaletteSize) + " colors)");
  }
  if (config.min_extent < 2.0 || config.max_extent < config.min_extent ||
      config.max_extent > static_cast<double>(config.image_size)) {
    throw ContractError("gen_synthetic: extent range does not fit the canvas");
  }
  std::mt19937_64 rng(seed);
  std::vector<SyntheticScene> scenes;
  scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    // A crowded draw may fail placement; resample the whole scene a bounded
    // number of times before giving up.
    std::size_t attempts = 0;
    for (;;) {
      try {
        scenes.push_back(render_scene(sample_shapes(config, rng), config.image_size));
        break;
      } catch (const GenerationError& e) {
        if (++attempts >= config.max_retries) {
          throw GenerationError(std::string(e.what()) + " (seed " + std::to_string(seed) +
                                ", scene " + std::to_string(i) + ")");
        }
      }
    }
  }
  return scenes;
}

MuseRecord scene_to_record(const SyntheticScene& scene, const std::string& image_name) {
  MuseRecord record;
  record.image = image_name;
  record.height = scene.image.dim(1);
  record.width = scene.image.dim(2);
  record.question = scene.question;
  record.answer = scene.answer;
  for (const SceneTarget& t : scene.targets) {
    MuseTarget target;
    target.description = t.description;
    target.category = t.category;
    target.bbox = t.bbox;
    target.rle_counts = rle_encode(t.mask).counts;
    record.targets.push_back(std::move(target));
  }
  return record;
}

std::vector<std::uint8_t> scene_to_rgb8(const SyntheticScene& scene) {
  const std::size_t h = scene.image.dim(1), w = scene.image.dim(2);
  const std::size_t plane = h * w;
  std::vector<std::uint8_t> rgb(plane * 3);
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = std::clamp(scene.image.data()[c * plane + p], 0.0, 1.0);
      rgb[p * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return rgb;
}

Tensor mask_to_tensor(const BinaryMask& mask) {
  Tensor t = Tensor::zeros({mask.height, mask.width});
  for (std::size_t i = 0; i < mask.data.size(); ++i) t.data()[i] = mask.data[i] ? 1.0 : 0.0;
  return t;
}

}  // namespace pixelseg
