#pragma once

#include "ctlab/corpus.hpp"
#include "ctlab/decision.hpp"
#include "ctlab/encoder.hpp"
#include "ctlab/network.hpp"
#include "ctlab/predictor.hpp"
#include "ctlab/tokenizer.hpp"

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ctlab {

struct ModelConfig {
  std::string encoder_id = "tiny";
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 2e-5;
  int patience = 2;
  bool use_class_weights = true;
  int max_tokens = 512;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

std::string to_json(const ModelConfig& c);
ModelConfig model_config_from_json(std::string_view json);

struct ClassWeights {
  std::array<double, kNumClasses> w{1.0, 1.0, 1.0, 1.0};
};

/// w_c = N / (K * n_c) over the given (training) samples. Throws when a class has no positives.
ClassWeights compute_class_weights(const Corpus& training);
ClassWeights compute_class_weights(const ClassCounts& counts, std::size_t n);

enum class Monitor { Minimize, Maximize };

/// Patience-based stopping on a monitored value; improvement means strictly better.
class EarlyStopping {
 public:
  EarlyStopping(int patience, Monitor mode);

  /// Feeds the value for the next epoch; true when training should stop after it.
  bool update(double value);
  int best_epoch() const { return best_epoch_; }
  double best_value() const { return best_; }
  int epochs_seen() const { return epoch_; }
  bool improved_last() const { return improved_last_; }

 private:
  int patience_;
  Monitor mode_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  double best_ = 0.0;
  bool improved_last_ = false;
};

struct EarlyStopOutcome {
  int stop_epoch = 0;  // last epoch run (1-based)
  int best_epoch = 0;
  bool triggered = false;
};

/// Runs EarlyStopping over a full metric sequence.
EarlyStopOutcome simulate_early_stopping(std::span<const double> metric, int patience, Monitor mode);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_macro_f1 = 0.0;
  bool improved = false;
};

struct TrainHistory {
  double initial_train_loss = 0.0;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  int stop_epoch = 0;
  bool early_stopped = false;
};

std::string history_to_jsonl(const TrainHistory& h);

/// A trained model with everything needed to reload and score texts.
class Checkpoint : public Predictor {
 public:
  Checkpoint(ModelConfig config, EncoderSpec encoder, std::shared_ptr<const Tokenizer> tokenizer, ClassifierNet net);

  ProbabilityMatrix predict(std::span<const std::string> texts) const override;
  /// Batched inference; rows are independent so any batch size gives the same result.
  ProbabilityMatrix predict(std::span<const std::string> texts, std::size_t batch_size) const;
  std::string name() const override { return name_; }

  const ModelConfig& config() const { return config_; }
  const EncoderSpec& encoder() const { return encoder_; }
  const Tokenizer& tokenizer() const { return *tokenizer_; }
  std::shared_ptr<const Tokenizer> tokenizer_ptr() const { return tokenizer_; }
  const ClassifierNet& net() const { return net_; }

  std::uint64_t corpus_fingerprint = 0;
  int best_epoch = 0;
  double val_metric_at_best = 0.0;
  ClassWeights class_weights;

  /// Writes weights.bin, config.json (and vocab.txt for WordPiece encoders).
  void save(const std::filesystem::path& dir) const;
  static Checkpoint load(const std::filesystem::path& dir);

  void set_name(std::string n) { name_ = std::move(n); }

 private:
  ModelConfig config_;
  EncoderSpec encoder_;
  std::shared_ptr<const Tokenizer> tokenizer_;
  ClassifierNet net_;
  std::string name_ = "checkpoint";
};

struct TrainResult {
  Checkpoint checkpoint;
  TrainHistory history;
};

/// Fine-tunes the configured encoder on splits.train, monitoring validation loss.
///
/// When out_dir is set the best checkpoint and history.jsonl are written there;
/// a NaN loss aborts with nan_dump.json in the same directory.
TrainResult train(const ModelConfig& config, const SplitSpec& splits, const Corpus& corpus,
                  const EncoderRegistry& registry = EncoderRegistry{},
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt);

}  // namespace ctlab
