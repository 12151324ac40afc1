#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pixelseg/records.hpp"

namespace pixelseg {

struct InstanceAnnotation {
  std::string description;
  std::string category;
  std::array<std::int64_t, 4> bbox = {0, 0, 0, 0};
  std::vector<std::uint64_t> rle_counts;
};

struct ImageAnnotation {
  std::string image;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<InstanceAnnotation> instances;
};

struct ConversionReport {
  std::size_t converted = 0;
  std::size_t skipped_no_instances = 0;
};

// Turns per-instance annotations into multi-referring question-answer
// records: per image, a seeded draw of 1..3 (configurable) distinct
// instances, question "Please segment the <d1>, <d2> in the image" and
// answer "<d1> is [SEG], <d2> is [SEG]" in the same order. Images without
// instances are skipped and counted.
std::pair<std::vector<MuseRecord>, ConversionReport> convert_multi_referring(
    const std::vector<ImageAnnotation>& annotations,
    std::pair<std::size_t, std::size_t> k_range, std::uint64_t seed);

// Annotation JSONL: {"image","height","width","instances":[...]} per line.
std::vector<ImageAnnotation> load_annotations(const std::string& path);
void save_annotations(const std::vector<ImageAnnotation>& annotations, const std::string& path);

}  // namespace pixelseg
