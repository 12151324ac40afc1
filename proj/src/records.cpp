#include "pixelseg/records.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pixelseg/error.hpp"
#include "pixelseg/eval.hpp"

namespace pixelseg {

using ordered_json = nlohmann::ordered_json;

std::size_t count_placeholders(const std::string& text) {
  std::size_t n = 0;
  const std::string marker = kMaskPlaceholder;
  for (std::size_t pos = text.find(marker); pos != std::string::npos;
       pos = text.find(marker, pos + marker.size())) {
    ++n;
  }
  return n;
}

std::size_t token_count(const std::string& text) {
  std::istringstream in(text);
  std::string word;
  std::size_t n = 0;
  while (in >> word) ++n;
  return n;
}

std::string record_to_line(const MuseRecord& record) {
  ordered_json j;
  j["image"] = record.image;
  j["height"] = record.height;
  j["width"] = record.width;
  j["question"] = record.question;
  j["answer"] = record.answer;
  ordered_json targets = ordered_json::array();
  for (const MuseTarget& t : record.targets) {
    ordered_json tj;
    tj["description"] = t.description;
    tj["category"] = t.category;
    tj["bbox"] = t.bbox;
    tj["counts"] = t.rle_counts;
    targets.push_back(std::move(tj));
  }
  j["targets"] = std::move(targets);
  return j.dump();
}

MuseRecord record_from_line(const std::string& line) {
  ordered_json j = ordered_json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) throw FormatError("record: line is not a JSON object");
  MuseRecord record;
  try {
    record.image = j.at("image").get<std::string>();
    record.height = j.at("height").get<std::size_t>();
    record.width = j.at("width").get<std::size_t>();
    record.question = j.at("question").get<std::string>();
    record.answer = j.at("answer").get<std::string>();
    for (const auto& tj : j.at("targets")) {
      MuseTarget t;
      t.description = tj.at("description").get<std::string>();
      t.category = tj.at("category").get<std::string>();
      const auto& bbox = tj.at("bbox");
      if (!bbox.is_array() || bbox.size() != 4) throw FormatError("record: bbox must have 4 entries");
      for (std::size_t i = 0; i < 4; ++i) t.bbox[i] = bbox[i].get<std::int64_t>();
      t.rle_counts = tj.at("counts").get<std::vector<std::uint64_t>>();
      record.targets.push_back(std::move(t));
    }
  } catch (const ordered_json::exception& e) {
    throw FormatError(std::string("record: ") + e.what());
  }
  if (record.height == 0 || record.width == 0) throw FormatError("record: empty image size");
  for (std::size_t k = 0; k < record.targets.size(); ++k) {
    rle_decode(record.target_rle(k));  // validates the count sum
  }
  return record;
}

std::vector<MuseRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("load_records: cannot open " + path);
  std::vector<MuseRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_line(line));
    } catch (const FormatError& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

void save_records(const std::vector<MuseRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw FormatError("save_records: cannot open " + path);
  for (const MuseRecord& r : records) out << record_to_line(r) << "\n";
  if (!out) throw FormatError("save_records: short write to " + path);
}

FilterResult filter_records(const std::vector<MuseRecord>& records, const FilterRules& rules) {
  FilterResult result;
  for (std::size_t idx = 0; idx < records.size(); ++idx) {
    const MuseRecord& r = records[idx];
    std::string reason;
    if (r.targets.empty()) {
      reason = "no_targets";
    } else if (rules.require_placeholder_match &&
               count_placeholders(r.answer) != r.targets.size()) {
      reason = "placeholder_mismatch";
    }
    if (reason.empty() && rules.reject_empty_descriptions) {
      for (const MuseTarget& t : r.targets) {
        if (token_count(t.description) == 0) {
          reason = "empty_description";
          break;
        }
      }
    }
    if (reason.empty()) {
      for (std::size_t k = 0; k < r.targets.size() && reason.empty(); ++k) {
        if (rle_decode(r.target_rle(k)).area() < rules.min_mask_area) reason = "empty_mask";
      }
    }
    if (reason.empty() && rules.reject_duplicates) {
      std::set<std::vector<std::uint64_t>> seen;
      for (const MuseTarget& t : r.targets) {
        if (!seen.insert(t.rle_counts).second) {
          reason = "duplicate_instance";
          break;
        }
      }
    }
    if (reason.empty()) {
      result.kept.push_back(r);
    } else {
      result.rejected.push_back({idx, reason});
    }
  }
  return result;
}

DatasetStatistics compute_statistics(const std::vector<MuseRecord>& records) {
  if (records.empty()) throw ContractError("compute_statistics: empty record set");
  DatasetStatistics stats;
  stats.num_records = records.size();
  std::size_t total_targets = 0;
  for (const MuseRecord& r : records) {
    const std::size_t k = r.targets.size();
    total_targets += k;
    stats.target_histogram[k] += 1;
    stats.max_targets = std::max(stats.max_targets, k);
    for (const MuseTarget& t : r.targets) {
      stats.token_histogram[token_count(t.description)] += 1;
      stats.category_histogram[t.category] += 1;
    }
  }
  stats.mean_targets = static_cast<double>(total_targets) / static_cast<double>(records.size());
  return stats;
}

std::string statistics_to_json(const DatasetStatistics& stats) {
  ordered_json j;
  j["num_records"] = stats.num_records;
  ordered_json targets;
  targets["mean"] = stats.mean_targets;
  targets["max"] = stats.max_targets;
  ordered_json th = ordered_json::object();
  for (const auto& [k, v] : stats.target_histogram) th[std::to_string(k)] = v;
  targets["histogram"] = std::move(th);
  j["targets"] = std::move(targets);
  ordered_json tok = ordered_json::object();
  for (const auto& [k, v] : stats.token_histogram) tok[std::to_string(k)] = v;
  j["description_tokens"] = ordered_json{{"histogram", std::move(tok)}};
  ordered_json cat = ordered_json::object();
  for (const auto& [k, v] : stats.category_histogram) cat[k] = v;
  j["categories"] = ordered_json{{"histogram", std::move(cat)}};
  return j.dump(2);
}

std::string statistics_histogram_dump(const DatasetStatistics& stats) {
  std::ostringstream out;
  out << "# targets per question\n";
  for (const auto& [k, v] : stats.target_histogram) out << k << " " << v << "\n";
  out << "\n\n# tokens per description\n";
  for (const auto& [k, v] : stats.token_histogram) out << k << " " << v << "\n";
  out << "\n\n# instances per category\n";
  for (const auto& [k, v] : stats.category_histogram) out << "\"" << k << "\" " << v << "\n";
  return out.str();
}

}  // namespace pixelseg
