#pragma once

#include "ctlab/corpus.hpp"
#include "ctlab/encoder.hpp"
#include "ctlab/error.hpp"
#include "ctlab/predictor.hpp"
#include "ctlab/types.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ctlab {

class Checkpoint;

struct WordCount {
  std::string word;
  std::size_t count = 0;
  friend bool operator==(const WordCount&, const WordCount&) = default;
};

/// Top-k whitespace tokens among samples labeled `cls`; ties broken lexicographically.
/// Texts are expected to be preprocessed already.
std::vector<WordCount> frequent_words(const Corpus& corpus, ClassId cls, std::size_t k);

/// Tokenizer plus its static input-embedding table.
struct EmbeddingSource {
  std::string encoder_id;
  std::shared_ptr<const Tokenizer> tokenizer;
  Eigen::MatrixXd table;  // vocab x dim
};

EmbeddingSource embedding_source(const Checkpoint& checkpoint);
/// Pretrained encoders only; the tiny encoder has no meaningful untrained table.
EmbeddingSource embedding_source(const EncoderRegistry& registry, std::string_view encoder_id);

/// Mean of the embedding rows of the word's subword pieces.
Eigen::VectorXd word_vector(std::string_view word, const EmbeddingSource& source);

template <typename A, typename B>
typename A::Scalar cosine(const Eigen::MatrixBase<A>& u, const Eigen::MatrixBase<B>& v) {
  if (u.size() != v.size())
    throw ValidationError("cosine: dimension mismatch " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  const auto nu = u.norm(), nv = v.norm();
  if (nu == 0 || nv == 0) throw ValidationError("cosine: zero-norm vector");
  return u.dot(v) / (nu * nv);
}

struct SimilarityRow {
  std::string word_a;
  std::string word_b;
  std::string encoder_id;
  double cosine = 0.0;
};

using SimilarityTable = std::vector<SimilarityRow>;

/// Cross product of pairs and encoders, pair-major.
SimilarityTable similarity_table(std::span<const std::pair<std::string, std::string>> pairs,
                                 std::span<const EmbeddingSource> sources);

/// One row per word pair, one column per encoder.
std::string similarity_csv(const SimilarityTable& table);

struct Explanation {
  std::string text;
  ClassId target_class = ClassId::Religio;
  std::vector<std::pair<std::string, double>> features;  // by |weight| descending
  double intercept = 0.0;
  double surrogate_fit = 0.0;  // weighted R^2
  double base_score = 0.0;     // model score of the unperturbed text
  std::uint64_t seed = 0;
  int n_samples = 0;
};

struct ExplainOptions {
  int n_samples = 1000;
  int n_features = 10;
  std::uint64_t seed = 0;
  double ridge_alpha = 1.0;
};

/// Local linear surrogate over whitespace-token deletion masks.
Explanation explain(std::string_view text, const Predictor& model, ClassId target_class,
                    const ExplainOptions& options = {});

std::string explanation_json(const Explanation& e);
/// Standalone page with the text's words shaded by their weights.
std::string explanation_html(const std::vector<Explanation>& explanations);

/// One token per line.
std::set<std::string> load_trigger_words(const std::filesystem::path& path);

/// Fraction of texts containing at least one trigger as a whole token.
double trigger_coverage(std::span<const std::string> texts, const std::set<std::string>& triggers);

}  // namespace ctlab
