#pragma once

#include "ctlab/trainer.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ctlab {

struct SearchSpace {
  double lr_min = 1e-5;
  double lr_max = 1e-3;
  std::vector<int> batch_sizes{8, 16, 32, 64};

  void validate() const;
};

enum class TuneStrategy {
  /// Tree-structured Parzen estimator over (log learning rate, batch size).
  ModelBased,
  Random,
};

struct TuneOptions {
  int budget = 10;
  std::uint64_t seed = 0;
  TuneStrategy strategy = TuneStrategy::ModelBased;
  int startup_trials = 4;
  int candidates = 24;
  double good_fraction = 0.25;
};

struct Trial {
  int index = 0;
  double learning_rate = 0.0;
  int batch_size = 0;
  std::optional<double> objective;  // validation macro F1; empty when the trial failed
  std::string error;
};

struct TuneResult {
  ModelConfig best;
  Trial best_trial;
  std::vector<Trial> trials;
};

/// Objective maximized by tune; normally train + validation macro F1.
using TuneObjective = std::function<double(const ModelConfig&)>;

/// Sequential search over {learning_rate, batch_size}. Failed trials are logged
/// and skipped; if every trial fails an Error aggregating the messages is thrown.
TuneResult tune(const ModelConfig& base, const SearchSpace& space, const TuneOptions& options,
                const TuneObjective& objective, const std::filesystem::path& trial_log = {});

std::string trials_to_jsonl(const std::vector<Trial>& trials);

}  // namespace ctlab
