#pragma once

#include "ctlab/corpus.hpp"
#include "ctlab/types.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ctlab {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// One-vs-rest precision/recall/F1; any zero denominator yields 0.
PRF per_class_prf(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gold);

/// Unweighted mean of the four violence-class F1 scores.
double macro_f1(const std::array<double, kNumClasses>& f1s);

/// counts(gold, pred) over {Religio, Ethno, Nondenominational, Noncommunal, NonViolent}.
using ConfusionMatrix = Eigen::Matrix<long, kNumDecisions, kNumDecisions>;

ConfusionMatrix confusion_matrix(std::span<const DecisionLabel> pred, std::span<const DecisionLabel> gold);

struct MetricsReport {
  std::array<PRF, kNumClasses> per_class{};
  double macro_f1 = 0.0;
  ConfusionMatrix confusion = ConfusionMatrix::Zero();
  std::array<std::size_t, kNumClasses> support{};
  std::size_t n = 0;
};

/// Per-class metrics over the binary prediction columns, confusion over single decisions.
MetricsReport evaluate(const BinaryMatrix& pred, std::span<const DecisionLabel> decisions,
                       std::span<const LabelVector> gold);

std::string to_json(const MetricsReport& report);
/// Plain-text table: one row per class with P/R/F1, macro F1 on the first row.
std::string render_table(const MetricsReport& report, std::string_view title = {});
std::string confusion_csv(const ConfusionMatrix& m);
/// Self-contained SVG heatmap of the confusion matrix.
std::string confusion_svg(const ConfusionMatrix& m, std::string_view title = {});

struct Misclassification {
  std::string id;
  std::string text;
  DecisionLabel gold = DecisionLabel::NonViolent;
  DecisionLabel pred = DecisionLabel::NonViolent;
  double score = 0.0;  // max class probability of the prediction row
};

/// Misclassified rows sorted by confidence, highest first (ties by id).
std::vector<Misclassification> misclassification_report(const Corpus& corpus, std::span<const std::string> ids,
                                                         std::span<const DecisionLabel> decisions,
                                                         const ProbabilityMatrix& probabilities);

/// Seeded sample of k entries without replacement, returned in report order.
std::vector<Misclassification> subsample(const std::vector<Misclassification>& report, std::size_t k,
                                         std::uint64_t seed);

std::string misclassifications_to_jsonl(const std::vector<Misclassification>& report);

}  // namespace ctlab
