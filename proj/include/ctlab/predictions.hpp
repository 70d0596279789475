#pragma once

#include "ctlab/types.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ctlab {

/// Rows of the predictions JSONL format `{id, probs:[4], decision?}`.
struct ScoredRows {
  std::vector<std::string> ids;
  ProbabilityMatrix probs;
  std::vector<std::optional<DecisionLabel>> decisions;
};

std::string predictions_to_jsonl(std::span<const std::string> ids, const ProbabilityMatrix& probs,
                                 std::span<const DecisionLabel> decisions = {});
ScoredRows parse_predictions(std::string_view jsonl);
ScoredRows read_predictions(const std::filesystem::path& path);

/// Reorders `rows` to follow `ids`; throws ValidationError listing the first missing id.
ScoredRows align_to(const ScoredRows& rows, std::span<const std::string> ids);

}  // namespace ctlab
