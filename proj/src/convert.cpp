#include "pixelseg/convert.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include "json.hpp"
#include "pixelseg/error.hpp"
#include "pixelseg/eval.hpp"

namespace pixelseg {

using ordered_json = nlohmann::ordered_json;

std::pair<std::vector<MuseRecord>, ConversionReport> convert_multi_referring(
    const std::vector<ImageAnnotation>& annotations,
    std::pair<std::size_t, std::size_t> k_range, std::uint64_t seed) {
  const auto [k_min, k_max] = k_range;
  if (k_min == 0 || k_min > k_max) {
    throw ContractError("convert_multi_referring: invalid k range");
  }
  std::mt19937_64 rng(seed);
  std::vector<MuseRecord> records;
  ConversionReport report;
  for (const ImageAnnotation& ann : annotations) {
    if (ann.instances.empty()) {
      ++report.skipped_no_instances;
      continue;
    }
    std::uniform_int_distribution<std::size_t> k_dist(k_min, k_max);
    const std::size_t k = std::min(k_dist(rng), ann.instances.size());
    std::vector<std::size_t> order(ann.instances.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(k);

    MuseRecord record;
    record.image = ann.image;
    record.height = ann.height;
    record.width = ann.width;
    std::string question = "Please segment the ";
    std::string answer;
    for (std::size_t i = 0; i < k; ++i) {
      const InstanceAnnotation& inst = ann.instances[order[i]];
      if (i) {
        question += ", ";
        answer += ", ";
      }
      question += inst.description;
      answer += inst.description + " is " + kMaskPlaceholder;
      MuseTarget target;
      target.description = inst.description;
      target.category = inst.category;
      target.bbox = inst.bbox;
      target.rle_counts = inst.rle_counts;
      record.targets.push_back(std::move(target));
    }
    record.question = question + " in the image";
    record.answer = answer;
    records.push_back(std::move(record));
    ++report.converted;
  }
  return {std::move(records), report};
}

std::vector<ImageAnnotation> load_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("load_annotations: cannot open " + path);
  std::vector<ImageAnnotation> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json j = ordered_json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": not a JSON object");
    }
    try {
      ImageAnnotation ann;
      ann.image = j.at("image").get<std::string>();
      ann.height = j.at("height").get<std::size_t>();
      ann.width = j.at("width").get<std::size_t>();
      for (const auto& ij : j.at("instances")) {
        InstanceAnnotation inst;
        inst.description = ij.at("description").get<std::string>();
        inst.category = ij.at("category").get<std::string>();
        const auto& bbox = ij.at("bbox");
        if (!bbox.is_array() || bbox.size() != 4) {
          throw FormatError("annotation: bbox must have 4 entries");
        }
        for (std::size_t i = 0; i < 4; ++i) inst.bbox[i] = bbox[i].get<std::int64_t>();
        inst.rle_counts = ij.at("counts").get<std::vector<std::uint64_t>>();
        ann.instances.push_back(std::move(inst));
      }
      out.push_back(std::move(ann));
    } catch (const ordered_json::exception& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void save_annotations(const std::vector<ImageAnnotation>& annotations, const std::string& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw FormatError("save_annotations: cannot open " + path);
  for (const ImageAnnotation& ann : annotations) {
    ordered_json j;
    j["image"] = ann.image;
    j["height"] = ann.height;
    j["width"] = ann.width;
    ordered_json instances = ordered_json::array();
    for (const InstanceAnnotation& inst : ann.instances) {
      ordered_json ij;
      ij["description"] = inst.description;
      ij["category"] = inst.category;
      ij["bbox"] = inst.bbox;
      ij["counts"] = inst.rle_counts;
      instances.push_back(std::move(ij));
    }
    j["instances"] = std::move(instances);
    out << j.dump() << "\n";
  }
  if (!out) throw FormatError("save_annotations: short write to " + path);
}

}  // namespace pixelseg
