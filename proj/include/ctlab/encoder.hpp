#pragma once

#include "ctlab/tokenizer.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace ctlab {

enum class EncoderKind {
  /// Built-in desk-scale encoder: hashed subword tokenizer, randomly initialized embeddings.
  Tiny,
  /// Directory with vocab.txt and model.safetensors; contributes tokenizer and input embeddings.
  Pretrained,
};

struct EncoderSpec {
  std::string id;
  EncoderKind kind = EncoderKind::Tiny;
  int embedding_dim = 32;
  int hidden_dim = 32;
  std::filesystem::path dir;
};

/// Reads one 2-D tensor (F32, F16 or BF16) whose name ends with `name_suffix`.
Eigen::MatrixXd read_safetensors_matrix(const std::filesystem::path& file, std::string_view name_suffix);
/// Minimal F32 writer, enough to build fixtures and export trained tables.
void write_safetensors_matrix(const std::filesystem::path& file, const std::string& name, const Eigen::MatrixXd& m);

inline constexpr std::string_view kWordEmbeddingSuffix = "word_embeddings.weight";

class EncoderRegistry {
 public:
  explicit EncoderRegistry(std::vector<std::filesystem::path> search_roots = {});

  /// Throws ConfigError with a remediation hint when the id is unknown.
  EncoderSpec resolve(std::string_view encoder_id) const;
  std::shared_ptr<const Tokenizer> tokenizer(const EncoderSpec& spec) const;
  /// Pretrained input-embedding table (vocab x dim).
  Eigen::MatrixXd pretrained_embeddings(const EncoderSpec& spec) const;

  const std::vector<std::filesystem::path>& roots() const { return roots_; }

 private:
  std::vector<std::filesystem::path> roots_;
};

}  // namespace ctlab
