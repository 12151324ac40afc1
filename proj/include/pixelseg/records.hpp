#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pixelseg/rle.hpp"

namespace pixelseg {

struct MuseTarget {
  std::string description;
  std::string category;
  std::array<std::int64_t, 4> bbox = {0, 0, 0, 0};  // x, y, w, h
  std::vector<std::uint64_t> rle_counts;            // dims come from the record
};

// One question-answer pair with per-target mask annotations. The answer text
// carries one "[SEG]" placeholder per target, in target order.
struct MuseRecord {
  std::string image;
  std::size_t height = 0;
  std::size_t width = 0;
  std::string question;
  std::string answer;
  std::vector<MuseTarget> targets;

  RleMask target_rle(std::size_t k) const {
    return RleMask{height, width, targets[k].rle_counts};
  }
};

std::size_t count_placeholders(const std::string& text);
std::size_t token_count(const std::string& text);  // whitespace-split words

// JSON Lines, one record per line, canonical key order. Loading validates
// structure and RLE sums; content rules live in filter_records.
std::vector<MuseRecord> load_records(const std::string& path);
void save_records(const std::vector<MuseRecord>& records, const std::string& path);
std::string record_to_line(const MuseRecord& record);
MuseRecord record_from_line(const std::string& line);

struct FilterRules {
  std::uint64_t min_mask_area = 1;
  bool reject_duplicates = true;
  bool require_placeholder_match = true;
  bool reject_empty_descriptions = true;
};

struct Rejection {
  std::size_t index = 0;
  std::string reason;
};

struct FilterResult {
  std::vector<MuseRecord> kept;
  std::vector<Rejection> rejected;
};

// Deterministic record-level filtering with machine-readable reasons:
// "no_targets", "empty_mask", "placeholder_mismatch", "empty_description",
// "duplicate_instance".
FilterResult filter_records(const std::vector<MuseRecord>& records, const FilterRules& rules);

struct DatasetStatistics {
  std::size_t num_records = 0;
  double mean_targets = 0.0;
  std::size_t max_targets = 0;
  std::map<std::size_t, std::size_t> target_histogram;
  std::map<std::size_t, std::size_t> token_histogram;
  std::map<std::string, std::size_t> category_histogram;
};

DatasetStatistics compute_statistics(const std::vector<MuseRecord>& records);
std::string statistics_to_json(const DatasetStatistics& stats);
// gnuplot-compatible dump: one "value count" pair per line, blocks separated
// by blank lines and titled with "# " comments.
std::string statistics_histogram_dump(const DatasetStatistics& stats);

}  // namespace pixelseg
