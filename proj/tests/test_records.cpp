#include <filesystem>
#include <fstream>
#include <set>
#include <random>
#include <sstream>

#include "doctest.h"
#include "pixelseg/convert.hpp"
#include "pixelseg/records.hpp"
#include "pixelseg/rle.hpp"

using namespace pixelseg;

namespace {

MuseRecord make_record(std::size_t targets) {
  MuseRecord r;
  r.image = "img.png";
  r.height = 4;
  r.width = 4;
  r.question = "Please segment the things in the image";
  std::string answer;
  for (std::size_t k = 0; k < targets; ++k) {
    if (k) answer += ", ";
    answer += "thing " + std::to_string(k) + " is [SEG]";
  }
  r.answer = answer;
  for (std::size_t k = 0; k < targets; ++k) {
    BinaryMask m = BinaryMask::zeros(4, 4);
    m.at(k % 4, k % 4) = 1;
    MuseTarget t;
    t.description = "thing number " + std::to_string(k);
    t.category = "thing";
    t.bbox = {static_cast<std::int64_t>(k % 4), static_cast<std::int64_t>(k % 4), 1, 1};
    t.rle_counts = rle_encode(m).counts;
    r.targets.push_back(std::move(t));
  }
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("record lines round trip byte-identically") {
  const std::vector<MuseRecord> records = {make_record(1), make_record(3)};
  const auto path = temp_file("pixelseg_records.jsonl");
  save_records(records, path.string());
  const std::string first = slurp(path.string());
  save_records(load_records(path.string()), path.string());
  CHECK(slurp(path.string()) == first);
  std::filesystem::remove(path);
}

TEST_CASE("record loading validates structure") {
  CHECK_THROWS_AS(record_from_line("not json"), FormatError);
  CHECK_THROWS_AS(record_from_line("{\"image\": \"x\"}"), FormatError);
  // RLE counts that do not fill height*width
  MuseRecord bad = make_record(1);
  bad.targets[0].rle_counts = {3};
  CHECK_THROWS_AS(record_from_line(record_to_line(bad)), FormatError);
}

TEST_CASE("token counting is a whitespace split") {
  CHECK(token_count("a red kayak parked on the beach") == 7);
  CHECK(token_count("") == 0);
  CHECK(token_count("  leading  and   multiple   spaces ") == 4);
}

TEST_CASE("statistics on a hand-counted fixture") {
  std::vector<MuseRecord> records = {make_record(2)};
  DatasetStatistics stats = compute_statistics(records);
  CHECK(stats.num_records == 1);
  CHECK(stats.mean_targets == 2.0);
  CHECK(stats.max_targets == 2);
  CHECK(stats.target_histogram.at(2) == 1);
  CHECK(stats.token_histogram.at(3) == 2);  // "thing number k"
  CHECK(stats.category_histogram.at("thing") == 2);

  records.push_back(make_record(4));
  stats = compute_statistics(records);
  CHECK(stats.mean_targets == doctest::Approx(3.0));
  CHECK(stats.max_targets == 4);
  CHECK(stats.target_histogram.at(4) == 1);
  CHECK_THROWS_AS(compute_statistics({}), ContractError);

  const std::string dump = statistics_histogram_dump(stats);
  CHECK(dump.find("# targets per question") != std::string::npos);
  CHECK(dump.find("\"thing\" 6") != std::string::npos);
}

TEST_CASE("filtering partitions records with machine-readable reasons") {
  std::vector<MuseRecord> records;
  for (int i = 0; i < 10; ++i) records.push_back(make_record(1 + i % 3));

  SUBCASE("clean fixture passes untouched") {
    FilterResult result = filter_records(records, FilterRules{});
    CHECK(result.kept.size() == 10);
    CHECK(result.rejected.empty());
  }
  SUBCASE("zero-area mask") {
    MuseRecord r = make_record(1);
    r.targets[0].rle_counts = {16};
    records.push_back(r);
    FilterResult result = filter_records(records, FilterRules{});
    REQUIRE(result.rejected.size() == 1);
    CHECK(result.rejected[0].reason == "empty_mask");
    CHECK(result.rejected[0].index == 10);
  }
  SUBCASE("placeholder mismatch") {
    MuseRecord r = make_record(2);
    r.answer = "only one [SEG] here";
    records.push_back(r);
    FilterResult result = filter_records(records, FilterRules{});
    REQUIRE(result.rejected.size() == 1);
    CHECK(result.rejected[0].reason == "placeholder_mismatch");
  }
  SUBCASE("empty description") {
    MuseRecord r = make_record(1);
    r.targets[0].description = "   ";
    records.push_back(r);
    FilterResult result = filter_records(records, FilterRules{});
    REQUIRE(result.rejected.size() == 1);
    CHECK(result.rejected[0].reason == "empty_description");
  }
  SUBCASE("duplicate instances") {
    MuseRecord r = make_record(2);
    r.targets[1].rle_counts = r.targets[0].rle_counts;
    records.push_back(r);
    FilterResult result = filter_records(records, FilterRules{});
    REQUIRE(result.rejected.size() == 1);
    CHECK(result.rejected[0].reason == "duplicate_instance");
  }
  SUBCASE("no targets") {
    MuseRecord r = make_record(1);
    r.targets.clear();
    r.answer = "nothing";
    records.push_back(r);
    FilterResult result = filter_records(records, FilterRules{});
    REQUIRE(result.rejected.size() == 1);
    CHECK(result.rejected[0].reason == "no_targets");
  }
}

TEST_CASE("multi-referring conversion") {
  std::mt19937_64 rng(31);
  std::vector<ImageAnnotation> annotations;
  for (int img = 0; img < 20; ++img) {
    ImageAnnotation ann;
    ann.image = "img" + std::to_string(img) + ".png";
    ann.height = 4;
    ann.width = 4;
    const std::size_t n = img == 0 ? 0 : 1 + rng() % 5;  // first image empty
    for (std::size_t i = 0; i < n; ++i) {
      InstanceAnnotation inst;
      inst.description = "object " + std::to_string(img) + "-" + std::to_string(i);
      inst.category = "object";
      BinaryMask m = BinaryMask::zeros(4, 4);
      m.at(i % 4, (i + img) % 4) = 1;
      inst.rle_counts = rle_encode(m).counts;
      ann.instances.push_back(std::move(inst));
    }
    annotations.push_back(std::move(ann));
  }

  SUBCASE("single instance mirrors the documented template") {
    ImageAnnotation one = annotations[1];
    one.instances.resize(1);
    auto [records, report] = convert_multi_referring({one}, {1, 3}, 7);
    REQUIRE(records.size() == 1);
    CHECK(records[0].question ==
          "Please segment the " + one.instances[0].description + " in the image");
    CHECK(records[0].answer == one.instances[0].description + " is [SEG]");
  }
  SUBCASE("empty images are skipped and counted") {
    auto [records, report] = convert_multi_referring(annotations, {1, 3}, 7);
    CHECK(report.skipped_no_instances == 1);
    CHECK(report.converted == 19);
    CHECK(records.size() == 19);
  }
  SUBCASE("selected targets are distinct and ordered like the question") {
    auto [records, report] = convert_multi_referring(annotations, {1, 3}, 7);
    for (const MuseRecord& r : records) {
      CHECK(count_placeholders(r.answer) == r.targets.size());
      std::set<std::string> seen;
      std::size_t question_pos = 0, answer_pos = 0;
      for (const MuseTarget& t : r.targets) {
        CHECK(seen.insert(t.description).second);
        const std::size_t qp = r.question.find(t.description, question_pos);
        const std::size_t ap = r.answer.find(t.description, answer_pos);
        CHECK(qp != std::string::npos);
        CHECK(ap != std::string::npos);
        question_pos = qp + 1;
        answer_pos = ap + 1;
      }
    }
  }
  SUBCASE("same seed gives byte-identical output") {
    auto [r1, rep1] = convert_multi_referring(annotations, {1, 3}, 42);
    auto [r2, rep2] = convert_multi_referring(annotations, {1, 3}, 42);
    const auto p1 = temp_file("pixelseg_conv1.jsonl");
    const auto p2 = temp_file("pixelseg_conv2.jsonl");
    save_records(r1, p1.string());
    save_records(r2, p2.string());
    CHECK(slurp(p1.string()) == slurp(p2.string()));
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
  }
  SUBCASE("annotation files round trip") {
    const auto path = temp_file("pixelseg_ann.jsonl");
    save_annotations(annotations, path.string());
    const std::vector<ImageAnnotation> back = load_annotations(path.string());
    REQUIRE(back.size() == annotations.size());
    CHECK(back[3].instances.size() == annotations[3].instances.size());
    CHECK(back[3].instances[0].description == annotations[3].instances[0].description);
    std::filesystem::remove(path);
  }
}
