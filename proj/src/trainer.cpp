#include "ctlab/trainer.hpp"

#include "ctlab/error.hpp"
#include "ctlab/metrics.hpp"
#include "ctlab/util.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <numeric>
#include <sstream>

namespace ctlab {

using ojson = nlohmann::ordered_json;

void ModelConfig::validate() const {
  if (encoder_id.empty()) throw ConfigError("encoder_id must be set");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (patience < 0) throw ConfigError("patience must be >= 0");
  if (!(learning_rate > 0.0 && learning_rate < 1.0)) throw ConfigError("learning_rate must be in (0, 1)");
  if (max_tokens < 8) throw ConfigError("max_tokens must be >= 8");
}

namespace {

ojson config_json(const ModelConfig& c) {
  ojson j;
  j["encoder_id"] = c.encoder_id;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["patience"] = c.patience;
  j["use_class_weights"] = c.use_class_weights;
  j["max_tokens"] = c.max_tokens;
  j["seed"] = c.seed;
  return j;
}

ModelConfig config_from(const nlohmann::json& j) {
  ModelConfig c;
  c.encoder_id = j.value("encoder_id", c.encoder_id);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.patience = j.value("patience", c.patience);
  c.use_class_weights = j.value("use_class_weights", c.use_class_weights);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.seed = j.value("seed", c.seed);
  return c;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string to_json(const ModelConfig& c) { return config_json(c).dump(2) + "\n"; }

ModelConfig model_config_from_json(std::string_view text) {
  try {
    return config_from(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

ClassWeights compute_class_weights(const ClassCounts& counts, std::size_t n) {
  ClassWeights cw;
  for (int c = 0; c < kNumClasses; ++c) {
    if (counts[c] == 0)
      throw ValidationError("class '" + std::string(kClassKeys[c]) +
                            "' has no positive training samples; add examples (see the augment workflow) "
                            "or disable class weights");
    cw.w[c] = static_cast<double>(n) / (kNumClasses * static_cast<double>(counts[c]));
  }
  return cw;
}

ClassWeights compute_class_weights(const Corpus& training) {
  return compute_class_weights(training.counts(), training.size());
}

EarlyStopping::EarlyStopping(int patience, Monitor mode) : patience_(patience), mode_(mode) {
  if (patience < 0) throw ConfigError("patience must be >= 0");
}

bool EarlyStopping::update(double value) {
  ++epoch_;
  const bool better = epoch_ == 1 ? !std::isnan(value)
                                  : (mode_ == Monitor::Minimize ? value < best_ : value > best_);
  if (better || best_epoch_ == 0) {
    if (!std::isnan(value)) {
      best_ = value;
      best_epoch_ = epoch_;
      improved_last_ = true;
      return false;
    }
  }
  improved_last_ = false;
  const int waited = epoch_ - best_epoch_;
  return waited >= std::max(patience_, 1);
}

EarlyStopOutcome simulate_early_stopping(std::span<const double> metric, int patience, Monitor mode) {
  EarlyStopping es(patience, mode);
  EarlyStopOutcome out;
  for (double v : metric) {
    if (es.update(v)) {
      out.triggered = true;
      break;
    }
  }
  out.stop_epoch = es.epochs_seen();
  out.best_epoch = es.best_epoch();
  return out;
}

std::string history_to_jsonl(const TrainHistory& h) {
  std::string out;
  for (const auto& e : h.epochs) {
    ojson j;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["val_loss"] = e.val_loss;
    j["val_macro_f1"] = e.val_macro_f1;
    j["improved"] = e.improved;
    out += j.dump() + "\n";
  }
  return out;
}

Checkpoint::Checkpoint(ModelConfig config, EncoderSpec encoder, std::shared_ptr<const Tokenizer> tokenizer,
                       ClassifierNet net)
    : config_(std::move(config)), encoder_(std::move(encoder)), tokenizer_(std::move(tokenizer)), net_(std::move(net)) {
  if (!tokenizer_) throw ConfigError("checkpoint needs a tokenizer");
  if (net_.vocab_size() < tokenizer_->vocab_size())
    throw ValidationError("embedding table smaller than tokenizer vocabulary");
}

ProbabilityMatrix Checkpoint::predict(std::span<const std::string> texts) const { return predict(texts, 64); }

ProbabilityMatrix Checkpoint::predict(std::span<const std::string> texts, std::size_t batch_size) const {
  ProbabilityMatrix out(static_cast<Eigen::Index>(texts.size()), kNumClasses);
  if (batch_size == 0) batch_size = 1;
  for (std::size_t begin = 0; begin < texts.size(); begin += batch_size) {
    const std::size_t end = std::min(texts.size(), begin + batch_size);
    for (std::size_t i = begin; i < end; ++i) {
      const auto ids = tokenizer_->encode(texts[i], config_.max_tokens);
      out.row(static_cast<Eigen::Index>(i)) = net_.forward(ids).transpose();
    }
  }
  return out;
}

void Checkpoint::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  net_.save(dir / "weights.bin");
  ojson j;
  j["model"] = config_json(config_);
  ojson enc;
  enc["id"] = encoder_.id;
  enc["kind"] = encoder_.kind == EncoderKind::Tiny ? "tiny" : "pretrained";
  enc["embedding_dim"] = net_.embed_dim();
  enc["hidden_dim"] = net_.hidden_dim();
  if (auto* hashed = dynamic_cast<const HashedSubwordTokenizer*>(tokenizer_.get())) {
    enc["tokenizer"] = {{"type", "hashed"}, {"buckets", hashed->buckets()}, {"piece_len", hashed->piece_len()}};
  } else if (auto* wp = dynamic_cast<const WordPieceTokenizer*>(tokenizer_.get())) {
    enc["tokenizer"] = {{"type", "wordpiece"}, {"id", wp->id()}, {"vocab", "vocab.txt"}};
    write_file(dir / "vocab.txt", join(wp->vocab(), "\n") + "\n");
  }
  j["encoder"] = enc;
  j["corpus_fingerprint"] = hex64(corpus_fingerprint);
  j["best_epoch"] = best_epoch;
  j["monitor"] = "val_loss";
  j["val_metric_at_best"] = val_metric_at_best;
  j["class_weights"] = class_weights.w;
  write_file(dir / "config.json", j.dump(2) + "\n");
}

Checkpoint Checkpoint::load(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "config.json") || !std::filesystem::exists(dir / "weights.bin"))
    throw ConfigError("not a checkpoint directory (need config.json and weights.bin): " + dir.string());
  try {
    auto j = nlohmann::json::parse(read_file(dir / "config.json"));
    ModelConfig cfg = config_from(j.at("model"));
    const auto& enc = j.at("encoder");
    EncoderSpec spec;
    spec.id = enc.at("id").get<std::string>();
    spec.kind = enc.at("kind").get<std::string>() == "tiny" ? EncoderKind::Tiny : EncoderKind::Pretrained;
    spec.embedding_dim = enc.at("embedding_dim").get<int>();
    spec.hidden_dim = enc.at("hidden_dim").get<int>();
    const auto& tok = enc.at("tokenizer");
    std::shared_ptr<const Tokenizer> tokenizer;
    if (tok.at("type") == "hashed")
      tokenizer = std::make_shared<HashedSubwordTokenizer>(tok.at("buckets").get<int>(), tok.at("piece_len").get<int>());
    else
      tokenizer = std::make_shared<WordPieceTokenizer>(
          WordPieceTokenizer::from_file(tok.at("id").get<std::string>(), dir / tok.at("vocab").get<std::string>()));
    Checkpoint ck(cfg, spec, tokenizer, ClassifierNet::load(dir / "weights.bin"));
    ck.corpus_fingerprint = std::stoull(j.at("corpus_fingerprint").get<std::string>(), nullptr, 16);
    ck.best_epoch = j.at("best_epoch").get<int>();
    ck.val_metric_at_best = j.at("val_metric_at_best").get<double>();
    ck.class_weights.w = j.at("class_weights").get<std::array<double, kNumClasses>>();
    ck.set_name(dir.filename().string());
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint " + dir.string() + ": " + e.what());
  }
}

namespace {

struct EncodedSet {
  std::vector<std::vector<int>> ids;
  std::vector<LabelVector> labels;
};

EncodedSet encode_all(const Corpus& c, const Tokenizer& tok, int max_tokens) {
  EncodedSet s;
  s.ids.reserve(c.size());
  for (const auto& smp : c.samples()) {
    s.ids.push_back(tok.encode(smp.text, max_tokens));
    s.labels.push_back(smp.labels);
  }
  return s;
}

double mean_loss(const ClassifierNet& net, const EncodedSet& set, const std::array<double, kNumClasses>& w) {
  if (set.ids.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < set.ids.size(); ++i) total += weighted_bce(net.forward(set.ids[i]), set.labels[i], w);
  return total / static_cast<double>(set.ids.size());
}

double macro_f1_on(const ClassifierNet& net, const EncodedSet& set) {
  ProbabilityMatrix p(static_cast<Eigen::Index>(set.ids.size()), kNumClasses);
  for (std::size_t i = 0; i < set.ids.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = net.forward(set.ids[i]).transpose();
  const auto report = evaluate(binarize(p), decide_rows(p), set.labels);
  return report.macro_f1;
}

[[noreturn]] void abort_nan(const std::optional<std::filesystem::path>& out_dir, int epoch, std::size_t batch,
                            const ClassifierNet& net, const TrainHistory& history) {
  std::string where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch);
  if (out_dir) {
    ojson dump;
    dump["epoch"] = epoch;
    dump["batch"] = batch;
    dump["weight_norms"] = {{"embedding", net.embedding.norm()}, {"w1", net.w1.norm()}, {"w2", net.w2.norm()},
                            {"wo", net.wo.norm()}};
    dump["history"] = nlohmann::json::array();
    for (const auto& e : history.epochs) dump["history"].push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}});
    write_file(*out_dir / "nan_dump.json", dump.dump(2) + "\n");
    where += "; diagnostics in " + (*out_dir / "nan_dump.json").string();
  }
  throw TrainingError("loss became NaN at " + where + " (try a lower learning rate)");
}

}  // namespace

TrainResult train(const ModelConfig& config, const SplitSpec& splits, const Corpus& corpus,
                  const EncoderRegistry& registry, const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  const auto spec = registry.resolve(config.encoder_id);
  const auto tokenizer = registry.tokenizer(spec);

  const Corpus train_set = corpus.subset(splits.train);
  const Corpus val_set = corpus.subset(splits.val);
  if (train_set.empty() || val_set.empty()) throw ValidationError("train: train and val splits must be non-empty");

  const ClassWeights weights = config.use_class_weights ? compute_class_weights(train_set) : ClassWeights{};
  const std::array<double, kNumClasses> unit{1.0, 1.0, 1.0, 1.0};

  Rng rng = Rng::substream(config.seed, "train");
  ClassifierNet net;
  if (spec.kind == EncoderKind::Tiny) {
    net = ClassifierNet(tokenizer->vocab_size(), spec.embedding_dim, spec.hidden_dim, rng);
  } else {
    net = ClassifierNet(1, spec.embedding_dim, spec.hidden_dim, rng);
    net.embedding = registry.pretrained_embeddings(spec);
    if (net.vocab_size() < tokenizer->vocab_size())
      throw ConfigError("encoder '" + spec.id + "': embedding rows fewer than vocab.txt entries");
  }

  const auto train_enc = encode_all(train_set, *tokenizer, config.max_tokens);
  const auto val_enc = encode_all(val_set, *tokenizer, config.max_tokens);

  TrainHistory history;
  history.initial_train_loss = mean_loss(net, train_enc, weights.w);

  AdamTrainer opt(net, config.learning_rate);
  EarlyStopping stopper(config.patience, Monitor::Minimize);
  ClassifierNet best_net = net;

  std::vector<std::size_t> order(train_enc.ids.size());
  std::iota(order.begin(), order.end(), 0);
  const auto bs = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += bs) {
      const std::size_t end = std::min(order.size(), begin + bs);
      std::vector<const std::vector<int>*> inputs;
      std::vector<LabelVector> labels;
      for (std::size_t k = begin; k < end; ++k) {
        inputs.push_back(&train_enc.ids[order[k]]);
        labels.push_back(train_enc.labels[order[k]]);
      }
      const double loss = opt.step(net, inputs, labels, weights.w);
      if (!std::isfinite(loss)) abort_nan(out_dir, epoch, batches, net, history);
      loss_sum += loss * static_cast<double>(end - begin);
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_loss = mean_loss(net, val_enc, unit);
    rec.val_macro_f1 = macro_f1_on(net, val_enc);
    if (!std::isfinite(rec.val_loss)) abort_nan(out_dir, epoch, batches, net, history);
    const bool stop = stopper.update(rec.val_loss);
    rec.improved = stopper.improved_last();
    if (rec.improved) best_net = net;
    history.epochs.push_back(rec);
    if (stop) {
      history.early_stopped = true;
      break;
    }
  }
  history.best_epoch = stopper.best_epoch();
  history.stop_epoch = stopper.epochs_seen();

  Checkpoint ck(config, spec, tokenizer, std::move(best_net));
  ck.corpus_fingerprint = train_set.fingerprint();
  ck.best_epoch = history.best_epoch;
  ck.val_metric_at_best = stopper.best_value();
  ck.class_weights = weights;
  if (out_dir) {
    ck.save(*out_dir);
    write_file(*out_dir / "history.jsonl", history_to_jsonl(history));
    ck.set_name(out_dir->filename().string());
  }
  return {std::move(ck), std::move(history)};
}

}  // namespace ctlab
