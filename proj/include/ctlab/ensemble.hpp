#pragma once

#include "ctlab/corpus.hpp"
#include "ctlab/decision.hpp"
#include "ctlab/error.hpp"
#include "ctlab/predictor.hpp"
#include "ctlab/types.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ctlab {

inline constexpr int kEnsembleSize = 5;

template <typename Scalar>
void check_members(std::span<const ProbMatrix<Scalar>> members) {
  if (members.size() != kEnsembleSize)
    throw ValidationError("ensemble needs exactly 5 member matrices, got " + std::to_string(members.size()));
  for (const auto& m : members)
    if (m.rows() != members.front().rows())
      throw ValidationError("ensemble members disagree on row count: " + std::to_string(m.rows()) + " vs " +
                            std::to_string(members.front().rows()));
}

/// Cellwise arithmetic mean of the five member matrices.
template <typename Scalar>
ProbMatrix<Scalar> combine_mean(std::span<const ProbMatrix<Scalar>> members) {
  check_members(members);
  ProbMatrix<Scalar> sum = ProbMatrix<Scalar>::Zero(members.front().rows(), kNumClasses);
  for (const auto& m : members) sum += m;
  return sum / Scalar(kEnsembleSize);
}

/// Per cell: 1 iff at least 3 of 5 members score >= threshold.
template <typename Scalar>
BinaryMatrix combine_vote(std::span<const ProbMatrix<Scalar>> members, Scalar threshold) {
  check_members(members);
  if (!(threshold > Scalar(0) && threshold < Scalar(1))) throw ValidationError("vote threshold must be in (0, 1)");
  Eigen::Matrix<int, Eigen::Dynamic, kNumClasses> votes =
      Eigen::Matrix<int, Eigen::Dynamic, kNumClasses>::Zero(members.front().rows(), kNumClasses);
  for (const auto& m : members) votes += (m.array() >= threshold).template cast<int>().matrix();
  return (votes.array() >= (kEnsembleSize / 2 + 1)).template cast<std::uint8_t>();
}

/// Decision for a vote row: NonViolent when no class won; among several
/// winners the one with the highest member-mean probability (class order on ties).
template <typename VoteRow, typename MeanRow>
DecisionLabel decide_vote(const Eigen::MatrixBase<VoteRow>& votes, const Eigen::MatrixBase<MeanRow>& mean) {
  int best = -1;
  for (int c = 0; c < kNumClasses; ++c)
    if (votes(c) && (best < 0 || mean(c) > mean(best))) best = c;
  return best < 0 ? DecisionLabel::NonViolent : static_cast<DecisionLabel>(best);
}

enum class Combiner { Mean, Vote, Stacker };

std::string_view to_string(Combiner c);
Combiner parse_combiner(std::string_view s);

/// 20 -> hidden (tanh) -> 4 (sigmoid) network over concatenated member scores.
struct StackerModel {
  Eigen::MatrixXd w1;  // hidden x 20
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // 4 x hidden
  Eigen::VectorXd b2;
  std::vector<std::string> trained_on;  // validation ids used for fitting
  std::uint64_t seed = 0;

  ProbabilityMatrix predict(std::span<const ProbabilityMatrix> members) const;

  std::string to_json() const;
  static StackerModel from_json(std::string_view json);
};

struct StackerOptions {
  int hidden = 32;
  int epochs = 500;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
};

/// Concatenates member rows into the n x 20 stacker input.
Eigen::MatrixXd stack_inputs(std::span<const ProbabilityMatrix> members);

/// Fits the stacker on validation-split predictions only.
///
/// Throws LeakageError if any row id belongs to split.test and ValidationError
/// for ids outside split.val.
StackerModel train_stacker(std::span<const ProbabilityMatrix> member_val_predictions,
                           std::span<const LabelVector> val_labels, std::span<const std::string> row_ids,
                           const SplitSpec& split, const StackerOptions& options = {});

struct EnsembleSpec {
  std::string name;
  std::vector<std::filesystem::path> members;
  Combiner combiner = Combiner::Vote;
  double threshold = kDefaultThreshold;
  std::filesystem::path stacker;  // required when combiner == Stacker

  void validate() const;
};

/// JSON file: {"name", "members": [5 paths], "combiner": "mean"|"vote"|"stacker", "threshold", "stacker"}.
/// Relative paths resolve against `base_dir` when given.
EnsembleSpec load_ensemble_spec(const std::filesystem::path& file, const std::filesystem::path& base_dir = {});

struct EnsembleOutput {
  /// Mean/stacker: combined probabilities. Vote: the 0/1 vote matrix as reals.
  ProbabilityMatrix scores;
  std::optional<BinaryMatrix> votes;
  std::vector<DecisionLabel> decisions;
  std::vector<ProbabilityMatrix> member_predictions;
};

/// Combines already-computed member predictions (offline recombination).
EnsembleOutput combine(std::vector<ProbabilityMatrix> member_predictions, Combiner combiner, double threshold,
                       const StackerModel* stacker = nullptr);

/// Runs every member once on `texts`, then combines.
EnsembleOutput run_ensemble(std::span<const Predictor* const> members, Combiner combiner, double threshold,
                            std::span<const std::string> texts, const StackerModel* stacker = nullptr);

/// Loads the spec's checkpoints (reporting all missing ones at once) and runs them.
EnsembleOutput run_ensemble(const EnsembleSpec& spec, std::span<const std::string> texts);

/// Loads the five member checkpoints; throws ConfigError listing every absent path.
std::vector<std::unique_ptr<Predictor>> load_members(const EnsembleSpec& spec);

}  // namespace ctlab
