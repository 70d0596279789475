#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ctlab {

struct SpecialIds {
  int pad = 0;
  int unk = 1;
  int cls = 2;
  int sep = 3;
};

/// Subword tokenizer producing BERT-style [CLS] ... [SEP] sequences.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  virtual SpecialIds specials() const { return {}; }

  virtual std::string id() const = 0;
  virtual int vocab_size() const = 0;
  /// Subword ids of one word (no special markers).
  virtual std::vector<int> word_ids(std::string_view word) const = 0;
  virtual std::vector<std::string> word_pieces(std::string_view word) const = 0;

  /// [CLS] + subwords of every pre-token + [SEP], untruncated.
  std::vector<int> encode(std::string_view text) const;
  /// Same as encode, truncated to max_tokens (keeping [SEP] last).
  std::vector<int> encode(std::string_view text, int max_tokens) const;
  static constexpr int kSpecialsPerSequence = 2;
};

/// Splits text into words on whitespace and isolates punctuation code points.
std::vector<std::string> pre_tokenize(std::string_view text);

/// Vocabulary-free subword tokenizer: each word is cut into pieces of at most
/// `piece_len` code points ("##" marks continuation) and each piece is hashed
/// into a fixed number of buckets.
class HashedSubwordTokenizer final : public Tokenizer {
 public:
  explicit HashedSubwordTokenizer(int buckets = 4096, int piece_len = 3);

  std::string id() const override { return "hashed-" + std::to_string(buckets_) + "-" + std::to_string(piece_len_); }
  int vocab_size() const override { return buckets_ + 4; }
  std::vector<int> word_ids(std::string_view word) const override;
  std::vector<std::string> word_pieces(std::string_view word) const override;

  int buckets() const { return buckets_; }
  int piece_len() const { return piece_len_; }

 private:
  int buckets_;
  int piece_len_;
};

/// Greedy longest-match-first WordPiece over a BERT-style vocab.txt.
class WordPieceTokenizer final : public Tokenizer {
 public:
  WordPieceTokenizer(std::string id, std::vector<std::string> vocab);
  static WordPieceTokenizer from_file(std::string id, const std::filesystem::path& vocab_txt);

  std::string id() const override { return id_; }
  int vocab_size() const override { return static_cast<int>(vocab_.size()); }
  std::vector<int> word_ids(std::string_view word) const override;
  std::vector<std::string> word_pieces(std::string_view word) const override;
  SpecialIds specials() const override { return specials_; }
  const std::vector<std::string>& vocab() const { return vocab_; }

 private:
  std::string id_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> index_;
  SpecialIds specials_;
  int max_chars_per_word_ = 100;
};

/// Resolves tokenizer ids. "tiny" is built in; other ids are directories
/// under the search roots that contain a vocab.txt.
class TokenizerRegistry {
 public:
  explicit TokenizerRegistry(std::vector<std::filesystem::path> search_roots = {});

  std::shared_ptr<const Tokenizer> resolve(std::string_view tokenizer_id) const;
  bool has(std::string_view tokenizer_id) const;

 private:
  std::vector<std::filesystem::path> roots_;
};

struct TokenStats {
  int token_count = 0;
  bool truncated = false;
};

/// Count is measured before truncation and includes the [CLS]/[SEP] markers.
TokenStats token_stats(std::string_view text, const Tokenizer& tokenizer, int max_tokens);
TokenStats token_stats(std::string_view text, std::string_view tokenizer_id, int max_tokens,
                       const TokenizerRegistry& registry = TokenizerRegistry{});

}  // namespace ctlab
