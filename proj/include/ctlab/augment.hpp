#pragma once

#include "ctlab/corpus.hpp"
#include "ctlab/predictor.hpp"
#include "ctlab/preprocess.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ctlab {

enum class CandidateStatus { Pending, Accepted, Rejected, Conflict };

std::string_view to_string(CandidateStatus s);
CandidateStatus parse_candidate_status(std::string_view s);
/// pending -> {accepted, rejected, conflict}; conflict -> {accepted, rejected}.
bool can_transition(CandidateStatus from, CandidateStatus to);

struct CandidateComment {
  std::string id;
  std::string text;
  std::string source;
  std::array<double, kNumClasses> model_score{};
  CandidateStatus status = CandidateStatus::Pending;

  double max_score() const;
  /// Throws StateError on an illegal transition.
  void transition(CandidateStatus to);
};

class AugmentationBatch {
 public:
  AugmentationBatch() = default;
  /// Rejects original-provenance samples and recomputes counts.
  explicit AugmentationBatch(std::vector<Sample> samples);

  const std::vector<Sample>& samples() const { return samples_; }
  const ClassCounts& counts() const { return counts_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  /// Rows that were skipped, with the reason; the caller decides where to print them.
  std::vector<std::string> warnings;

 private:
  std::vector<Sample> samples_;
  ClassCounts counts_{};
};

struct ParaphrasePair {
  std::string source_id;
  std::string text;
};

/// CSV with header `source_id,paraphrased_text`.
std::vector<ParaphrasePair> parse_paraphrase_csv(std::string_view contents);
std::vector<ParaphrasePair> load_paraphrases(const std::filesystem::path& path);

/// Paraphrases inherit the source labels. A paraphrase whose normalized text
/// equals a normalized corpus text (or an earlier paraphrase) is dropped.
AugmentationBatch ingest_paraphrases(const Corpus& base, std::span<const ParaphrasePair> pairs,
                                     const PreprocessConfig& config);

inline constexpr double kDefaultMiningThreshold = 0.5;

/// Keeps texts whose highest class probability reaches `threshold`, best first.
std::vector<CandidateComment> mine_candidates(std::span<const std::string> external_texts, const Predictor& model,
                                              double threshold = kDefaultMiningThreshold,
                                              std::string_view source = "external");

/// Plain text (one comment per line) or JSONL with a `text` field, chosen by extension.
std::vector<std::string> load_external_texts(const std::filesystem::path& path);

std::string candidates_to_jsonl(const std::vector<CandidateComment>& candidates);
std::vector<CandidateComment> parse_candidates_jsonl(std::string_view contents);

/// base plus the batch; throws ValidationError on an id already in base.
Corpus merge_accepted(const Corpus& base, const AugmentationBatch& batch);

AugmentationBatch load_batch(const std::filesystem::path& path);

}  // namespace ctlab
