#pragma once

#include "ctlab/corpus.hpp"
#include "ctlab/predictor.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ctlab::testing {

/// Four classes, each marked by its own keyword vocabulary and padded with
/// shared filler words. Ids are "s0001".. in order; labels cycle by class.
Corpus separable_corpus(std::size_t n, std::uint64_t seed, bool with_nonviolent = false);

/// Scores each text with a per-row function.
class FnPredictor : public Predictor {
 public:
  using Fn = std::function<std::array<double, kNumClasses>(const std::string&)>;
  explicit FnPredictor(Fn fn, std::string name = "fn") : fn_(std::move(fn)), name_(std::move(name)) {}
  ProbabilityMatrix predict(std::span<const std::string> texts) const override;
  std::string name() const override { return name_; }
  mutable std::size_t calls = 0;

 private:
  Fn fn_;
  std::string name_;
};

/// 0.9 for `target` when the whitespace token `key` is present, else 0.1.
FnPredictor keyed_stub(std::string key, int target = 0);

std::filesystem::path temp_dir(const std::string& tag);

/// Writes <dir>/vocab.txt (specials, then `vocab`) and a model.safetensors
/// holding a seeded random "embeddings.word_embeddings.weight" table.
void write_pretrained_fixture(const std::filesystem::path& dir, const std::vector<std::string>& vocab, int dim,
                              std::uint64_t seed);

}  // namespace ctlab::testing
