#include "pixelseg/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "httplib.h"
#include "json.hpp"
#include "pixelseg/error.hpp"

namespace pixelseg {

namespace {

std::set<std::string> word_set(const std::string& text) {
  std::set<std::string> words;
  std::istringstream in(text);
  std::string word;
  while (in >> word) words.insert(word);
  return words;
}

double word_jaccard(const std::string& a, const std::string& b) {
  const std::set<std::string> wa = word_set(a), wb = word_set(b);
  if (wa.empty() && wb.empty()) return 1.0;
  std::size_t inter = 0;
  for (const std::string& w : wa) inter += wb.count(w);
  const std::size_t uni = wa.size() + wb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

int clamp_raw(int score) { return std::min(10, std::max(1, score)); }

}  // namespace

StubScorer::StubScorer(StubMode mode, int constant_score)
    : mode_(mode), constant_score_(clamp_raw(constant_score)) {}

std::vector<int> StubScorer::score(const ScoreRequest& request) {
  std::vector<int> out(request.num_predictions, constant_score_);
  if (mode_ == StubMode::kConstant) return out;
  for (std::size_t i = 0; i < request.num_predictions; ++i) {
    const std::string expected =
        i < request.expected_descriptions.size() ? request.expected_descriptions[i] : "";
    const std::string spliced =
        i < request.spliced_descriptions.size() ? request.spliced_descriptions[i] : "";
    if (mode_ == StubMode::kExact) {
      out[i] = (!expected.empty() && expected == spliced) ? 10 : 1;
    } else {
      out[i] = clamp_raw(1 + static_cast<int>(std::lround(9.0 * word_jaccard(expected, spliced))));
    }
  }
  return out;
}

RemoteScorer::RemoteScorer(std::string endpoint, int timeout_ms) : timeout_ms_(timeout_ms) {
  if (endpoint.empty()) throw ConfigError("remote scorer: empty endpoint");
  const std::size_t scheme = endpoint.find("://");
  const std::size_t path_start =
      endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) {
    base_ = endpoint;
    path_ = "/score";
  } else {
    base_ = endpoint.substr(0, path_start);
    path_ = endpoint.substr(path_start);
  }
}

std::vector<int> RemoteScorer::score(const ScoreRequest& request) {
  nlohmann::json body;
  body["text"] = request.text;
  body["num_predictions"] = request.num_predictions;

  httplib::Client client(base_);
  client.set_connection_timeout(0, timeout_ms_ * 1000);
  client.set_read_timeout(0, timeout_ms_ * 1000);
  client.set_write_timeout(0, timeout_ms_ * 1000);
  httplib::Result res = client.Post(path_, body.dump(), "application/json");
  if (!res) {
    throw TransportError("remote scorer: " + base_ + " unreachable (" +
                         httplib::to_string(res.error()) + ")");
  }
  if (res->status != 200) {
    throw ProtocolError("remote scorer: HTTP status " + std::to_string(res->status));
  }
  nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, /*allow_exceptions=*/false);
  if (reply.is_discarded() || !reply.contains("scores") || !reply["scores"].is_array()) {
    throw ProtocolError("remote scorer: reply is not a {\"scores\": [...]} object");
  }
  std::vector<int> out;
  for (const auto& v : reply["scores"]) {
    if (!v.is_number_integer()) throw ProtocolError("remote scorer: non-integer score");
    const int s = v.get<int>();
    if (s < 1 || s > 10) throw ProtocolError("remote scorer: score " + std::to_string(s) +
                                             " outside 1..10");
    out.push_back(s);
  }
  if (out.size() != request.num_predictions) {
    throw ProtocolError("remote scorer: expected " + std::to_string(request.num_predictions) +
                        " scores, got " + std::to_string(out.size()));
  }
  return out;
}

std::unique_ptr<Scorer> make_stub_scorer(const std::string& mode, int constant_score) {
  if (mode == "stub-const") return std::make_unique<StubScorer>(StubMode::kConstant, constant_score);
  if (mode == "stub-exact") return std::make_unique<StubScorer>(StubMode::kExact);
  if (mode == "stub-jaccard") return std::make_unique<StubScorer>(StubMode::kJaccard);
  throw ConfigError("unknown stub scorer mode: " + mode);
}

}  // namespace pixelseg
