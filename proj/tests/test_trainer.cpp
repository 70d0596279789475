#include "synthetic.hpp"

#include "ctlab/decision.hpp"
#include "ctlab/encoder.hpp"
#include "ctlab/error.hpp"
#include "ctlab/metrics.hpp"
#include "ctlab/random.hpp"
#include "ctlab/trainer.hpp"
#include "ctlab/util.hpp"

#include <doctest.h>

#include <limits>

using namespace ctlab;

namespace {

EarlyStopOutcome stop_oracle(const std::vector<double>& seq, int patience, bool minimize) {
  double best = 0;
  int best_epoch = 0, since = 0;
  for (int e = 1; e <= static_cast<int>(seq.size()); ++e) {
    const double v = seq[static_cast<std::size_t>(e - 1)];
    if (best_epoch == 0 || (minimize ? v < best : v > best)) {
      best = v;
      best_epoch = e;
      since = 0;
    } else if (++since >= std::max(patience, 1)) {
      return {e, best_epoch, true};
    }
  }
  return {static_cast<int>(seq.size()), best_epoch, false};
}

ModelConfig smoke_config() {
  ModelConfig m;
  m.epochs = 10;
  m.learning_rate = 5e-3;
  m.batch_size = 16;
  return m;
}

double val_f1(const Checkpoint& ck, const Corpus& c, const SplitSpec& s) {
  std::vector<std::string> texts;
  std::vector<LabelVector> gold;
  const auto val = c.subset(s.val);
  for (const auto& x : val.samples()) {
    texts.push_back(x.text);
    gold.push_back(x.labels);
  }
  const auto p = ck.predict(texts);
  return evaluate(binarize(p, 0.5), decide_rows(p, 0.5), gold).macro_f1;
}

}  // namespace

TEST_CASE("reciprocal class weights") {
  const auto w = compute_class_weights(ClassCounts{800, 100, 50, 50}, 1000);
  CHECK(w.w[0] == 0.3125);
  CHECK(w.w[1] == 2.5);
  CHECK(w.w[2] == 5.0);
  CHECK(w.w[3] == 5.0);
  CHECK_THROWS_AS(compute_class_weights(ClassCounts{10, 0, 5, 5}, 20), ValidationError);
}

TEST_CASE("weight times count is constant") {
  Rng rng(10);
  for (int t = 0; t < 1000; ++t) {
    ClassCounts counts;
    std::size_t n = 0;
    for (auto& c : counts) {
      c = 1 + rng.below(5000);
      n += c;
    }
    n += rng.below(3000);  // non-violent rows still count toward N
    const auto w = compute_class_weights(counts, n);
    for (int c = 0; c < 4; ++c)
      CHECK(w.w[c] * static_cast<double>(counts[c]) == doctest::Approx(static_cast<double>(n) / 4.0).epsilon(1e-12));
  }
}

TEST_CASE("early stopping matches the oracle") {
  Rng rng(12);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> seq(1 + rng.below(30));
    for (auto& v : seq) v = std::round(rng.uniform() * 10) / 10;  // coarse values force ties
    const int patience = static_cast<int>(rng.below(5));
    const bool minimize = rng.below(2) == 0;
    const auto want = stop_oracle(seq, patience, minimize);
    const auto got = simulate_early_stopping(seq, patience, minimize ? Monitor::Minimize : Monitor::Maximize);
    CHECK(got.stop_epoch == want.stop_epoch);
    CHECK(got.best_epoch == want.best_epoch);
    CHECK(got.triggered == want.triggered);
  }
}

TEST_CASE("early stopping with patience 2") {
  const std::vector<double> loss = {1.0, 0.8, 0.85, 0.9, 0.7};
  const auto o = simulate_early_stopping(loss, 2, Monitor::Minimize);
  CHECK(o.stop_epoch == 4);
  CHECK(o.best_epoch == 2);
  CHECK(o.triggered);
  const std::vector<double> flat = {0.5, 0.5, 0.5};
  CHECK(simulate_early_stopping(flat, 2, Monitor::Minimize).best_epoch == 1);
}

TEST_CASE("model config validation and json") {
  ModelConfig m;
  CHECK_NOTHROW(m.validate());
  CHECK(m.epochs == 30);
  CHECK(m.batch_size == 32);
  CHECK(m.learning_rate == 2e-5);
  CHECK(m.patience == 2);
  CHECK(m.max_tokens == 512);
  m.seed = 99;
  m.use_class_weights = false;
  CHECK(model_config_from_json(to_json(m)) == m);
  m.batch_size = 0;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = {};
  m.learning_rate = 0;
  CHECK_THROWS_AS(m.validate(), ConfigError);
}

TEST_CASE("tiny encoder learns a separable corpus") {
  const auto corpus = testing::separable_corpus(200, 1);
  const auto splits = split(corpus, 0);
  auto r = train(smoke_config(), splits, corpus);
  CHECK(val_f1(r.checkpoint, corpus, splits) >= 0.9);
  CHECK(r.history.epochs.size() == static_cast<std::size_t>(r.history.stop_epoch));
  CHECK(r.history.best_epoch >= 1);
  CHECK(r.history.epochs.back().train_loss < r.history.initial_train_loss);
}

TEST_CASE("training is deterministic and checkpoints reload") {
  const auto corpus = testing::separable_corpus(120, 2);
  const auto splits = split(corpus, 3);
  auto dir = testing::temp_dir("train");
  auto cfg = smoke_config();
  cfg.epochs = 4;
  cfg.seed = 7;
  auto a = train(cfg, splits, corpus, EncoderRegistry{}, dir / "a");
  auto b = train(cfg, splits, corpus, EncoderRegistry{}, dir / "b");
  CHECK(read_file(dir / "a" / "history.jsonl") == read_file(dir / "b" / "history.jsonl"));
  CHECK(read_file(dir / "a" / "weights.bin") == read_file(dir / "b" / "weights.bin"));

  auto other = cfg;
  other.seed = 8;
  auto c = train(other, splits, corpus);
  CHECK(history_to_jsonl(c.history) != history_to_jsonl(a.history));

  const auto loaded = Checkpoint::load(dir / "a");
  std::vector<std::string> texts;
  for (const auto& s : corpus.samples()) texts.push_back(s.text);
  const auto p1 = a.checkpoint.predict(texts);
  const auto p2 = loaded.predict(texts);
  CHECK(p1 == p2);
  CHECK(loaded.predict(texts, 1) == loaded.predict(texts, 64));
  CHECK(loaded.corpus_fingerprint == corpus.subset(splits.train).fingerprint());
  CHECK(loaded.best_epoch == a.history.best_epoch);
  CHECK(loaded.config() == cfg);
  std::filesystem::remove_all(dir);
}

TEST_CASE("best checkpoint is kept, not the last epoch") {
  const auto corpus = testing::separable_corpus(120, 5);
  const auto splits = split(corpus, 1);
  auto cfg = smoke_config();
  cfg.learning_rate = 0.3;  // large steps make validation loss bounce
  cfg.epochs = 12;
  cfg.patience = 3;
  auto r = train(cfg, splits, corpus);
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  for (const auto& e : r.history.epochs)
    if (e.val_loss < best) {
      best = e.val_loss;
      best_epoch = e.epoch;
    }
  CHECK(r.history.best_epoch == best_epoch);
  CHECK(r.checkpoint.best_epoch == best_epoch);
}

TEST_CASE("missing class positives point at augmentation") {
  auto corpus = testing::separable_corpus(80, 1);
  std::vector<Sample> kept;
  for (const auto& s : corpus.samples())
    if (!s.labels[ClassId::Nondenominational]) kept.push_back(s);
  Corpus c(kept);
  try {
    train(smoke_config(), split(c, 0), c);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("augment") != std::string::npos);
  }
  auto cfg = smoke_config();
  cfg.use_class_weights = false;
  cfg.epochs = 1;
  CHECK_NOTHROW(train(cfg, split(c, 0), c));
}

TEST_CASE("NaN loss aborts with a dump") {
  auto dir = testing::temp_dir("nan");
  testing::write_pretrained_fixture(dir / "enc" / "broken", {"দেশ", "মানুষ"}, 4, 1);
  auto table = read_safetensors_matrix(dir / "enc" / "broken" / "model.safetensors", kWordEmbeddingSuffix);
  table.setConstant(std::numeric_limits<double>::quiet_NaN());
  write_safetensors_matrix(dir / "enc" / "broken" / "model.safetensors", "embeddings.word_embeddings.weight", table);

  const auto corpus = testing::separable_corpus(60, 1);
  auto cfg = smoke_config();
  cfg.encoder_id = "broken";
  CHECK_THROWS_AS(train(cfg, split(corpus, 0), corpus, EncoderRegistry({dir / "enc"}), dir / "out"), TrainingError);
  CHECK(std::filesystem::exists(dir / "out" / "nan_dump.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("pretrained encoder supplies tokenizer and embeddings") {
  auto dir = testing::temp_dir("pre");
  testing::write_pretrained_fixture(dir / "mini", {"মন্দির", "মসজিদ", "পাহাড়ি", "নারী", "মার", "##র"}, 16, 2);
  const auto corpus = testing::separable_corpus(100, 1);
  auto cfg = smoke_config();
  cfg.encoder_id = "mini";
  cfg.epochs = 2;
  auto r = train(cfg, split(corpus, 0), corpus, EncoderRegistry({dir}), dir / "ck");
  CHECK(std::filesystem::exists(dir / "ck" / "vocab.txt"));
  const auto loaded = Checkpoint::load(dir / "ck");
  CHECK(loaded.tokenizer().vocab_size() == 10);
  CHECK(loaded.net().embed_dim() == 16);
  std::filesystem::remove_all(dir);
}
