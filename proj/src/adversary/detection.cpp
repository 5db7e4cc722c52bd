#include <string>

#include "qdb/adversary.hpp"
#include "qdb/errors.hpp"

namespace qdb {

DetectionResult reflection_detection(const std::vector<RoundRecord>& rounds, const DetectionConfig& cfg) {
  DetectionResult result = detection_statistic(rounds, cfg);
  if (result.samples < cfg.min_test_rounds || result.samples == 0) {
    throw InsufficientTestRounds("reflection detection needs " + std::to_string(cfg.min_test_rounds) +
                                 " test rounds, got " + std::to_string(result.samples));
  }
  return result;
}

}  // namespace qdb
