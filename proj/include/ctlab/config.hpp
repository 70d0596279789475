#pragma once

#include "ctlab/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ctlab {

struct RunConfig {
  std::filesystem::path corpus;
  std::filesystem::path stopwords;
  std::filesystem::path emoji_map;
  std::filesystem::path checkpoint_dir;
  std::filesystem::path output_dir = "out";
  std::filesystem::path ensemble;
  /// Extra roots searched for pretrained encoder directories.
  std::vector<std::filesystem::path> encoder_roots;
  ModelConfig model;
  std::uint64_t seed = 0;
  double threshold = 0.5;
};

/// Key=value file with optional [paths] and [model] sections; quotes around
/// values are stripped and relative paths resolve against the file's directory.
///
///   seed = 7
///   [paths]
///   corpus = "data/corpus.jsonl"
///   [model]
///   encoder_id = "tiny"
///   epochs = 10
RunConfig load_run_config(const std::filesystem::path& file);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

/// Applies CTLAB_<FIELD> overrides (CTLAB_CORPUS, CTLAB_EPOCHS, CTLAB_SEED, ...).
void apply_env(RunConfig& config, const EnvLookup& env);

/// Every path that is set but absent on disk, named as `label: path`.
std::vector<std::string> missing_paths(const std::vector<std::pair<std::string, std::filesystem::path>>& paths);

/// Throws ConfigError listing all missing paths at once.
void require_paths(const std::vector<std::pair<std::string, std::filesystem::path>>& paths);

}  // namespace ctlab
