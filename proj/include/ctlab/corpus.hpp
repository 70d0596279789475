#pragma once

#include "ctlab/types.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ctlab {

enum class Provenance { Original, Paraphrase, Manual, Mined };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view s);

struct Sample {
  std::string id;
  std::string text;
  LabelVector labels;
  Provenance provenance = Provenance::Original;
  bool needs_context = false;
  /// Source-dataset subclass (1-4) carried through untouched; never used for modeling.
  std::optional<std::string> sublabel;

  friend bool operator==(const Sample&, const Sample&) = default;
};

using ClassCounts = std::array<std::size_t, kNumClasses>;

/// Immutable, validated collection of samples.
class Corpus {
 public:
  Corpus() = default;
  /// Validates every sample (non-empty text, label invariants, unique ids).
  explicit Corpus(std::vector<Sample> samples);

  const std::vector<Sample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const ClassCounts& counts() const { return counts_; }
  std::size_t nonviolent_count() const { return nonviolent_; }

  const Sample* find(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }
  const Sample& at(std::string_view id) const;

  /// Samples restricted to the given ids, in the order given.
  Corpus subset(const std::vector<std::string>& ids) const;

  /// FNV-1a over the canonical JSONL serialization.
  std::uint64_t fingerprint() const;

 private:
  std::vector<Sample> samples_;
  std::unordered_map<std::string, std::size_t> index_;
  ClassCounts counts_{};
  std::size_t nonviolent_ = 0;
};

enum class CorpusFormat { Csv, Jsonl };

/// Picks the format from the extension (.csv, .jsonl/.json); throws ConfigError otherwise.
CorpusFormat format_from_path(const std::filesystem::path& path);

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);
Corpus load_corpus(const std::filesystem::path& path);
Corpus parse_corpus_csv(std::string_view contents);
Corpus parse_corpus_jsonl(std::string_view contents);

/// Canonical serialization: samples ordered by id, fields in header order.
std::string to_csv(const Corpus& corpus);
std::string to_jsonl(const Corpus& corpus);
std::string to_jsonl(const std::vector<Sample>& samples);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

struct ClassDistribution {
  std::array<double, kNumClasses> fraction{};
  /// Share of all-zero rows; always 0 when the distribution is violent-only.
  double nonviolent = 0.0;
  std::size_t denominator = 0;
};

ClassDistribution class_distribution(const Corpus& corpus, bool violent_only);

struct SplitSpec {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
  std::uint64_t seed = 0;

  enum class Part { Train, Val, Test };
  std::optional<Part> part_of(std::string_view id) const;
};

inline constexpr double kTestFraction = 0.20;
inline constexpr double kValFraction = 0.15;

/// Stratified by decision label, deterministic for (corpus, seed).
SplitSpec split(const Corpus& corpus, std::uint64_t seed);

std::string split_to_json(const SplitSpec& s);
SplitSpec split_from_json(std::string_view json);

}  // namespace ctlab
