#pragma once

#include <memory>
#include <string>
#include <vector>

namespace pixelseg {

// One scoring call: the description-spliced response text plus, for the
// offline stubs, what each placeholder claimed and what was spliced in.
struct ScoreRequest {
  std::string text;
  std::size_t num_predictions = 0;
  std::vector<std::string> expected_descriptions;  // per prediction, may be empty
  std::vector<std::string> spliced_descriptions;   // per prediction, may be empty
};

// Returns one raw score in 1..10 per prediction.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::vector<int> score(const ScoreRequest& request) = 0;
};

enum class StubMode {
  kConstant,  // fixed raw score for every prediction
  kExact,     // 10 when the spliced description equals the expected one, else 1
  kJaccard,   // 1 + round(9 * word-set Jaccard of expected vs spliced)
};

class StubScorer : public Scorer {
 public:
  explicit StubScorer(StubMode mode, int constant_score = 10);
  std::vector<int> score(const ScoreRequest& request) override;

 private:
  StubMode mode_;
  int constant_score_;
};

// POSTs {"text":..., "num_predictions":...} as JSON and expects
// {"scores":[1..10,...]} back. Unreachable endpoints raise TransportError;
// malformed replies raise ProtocolError.
class RemoteScorer : public Scorer {
 public:
  RemoteScorer(std::string endpoint, int timeout_ms = 5000);
  std::vector<int> score(const ScoreRequest& request) override;

 private:
  std::string base_;
  std::string path_;
  int timeout_ms_;
};

std::unique_ptr<Scorer> make_stub_scorer(const std::string& mode, int constant_score = 10);

}  // namespace pixelseg
