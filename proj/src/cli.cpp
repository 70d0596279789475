#include "ctlab/cli.hpp"

#include "ctlab/annotation.hpp"
#include "ctlab/annotation_http.hpp"
#include "ctlab/augment.hpp"
#include "ctlab/config.hpp"
#include "ctlab/corpus.hpp"
#include "ctlab/csv.hpp"
#include "ctlab/decision.hpp"
#include "ctlab/diagnostics.hpp"
#include "ctlab/ensemble.hpp"
#include "ctlab/error.hpp"
#include "ctlab/metrics.hpp"
#include "ctlab/predictions.hpp"
#include "ctlab/preprocess.hpp"
#include "ctlab/tokenizer.hpp"
#include "ctlab/trainer.hpp"
#include "ctlab/tune.hpp"
#include "ctlab/util.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <ostream>

#ifndef CTLAB_DATA_DIR
#define CTLAB_DATA_DIR "data"
#endif

namespace ctlab {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

/// Flags shared by every subcommand; empty/unset means "keep the config value".
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string stopwords;
  std::string emoji_map;
  std::vector<std::string> encoders;
  std::optional<double> threshold;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Run config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Root seed");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--stopwords", f.stopwords, "Stopword list");
  cmd->add_option("--emoji-map", f.emoji_map, "Emoji map JSON");
  cmd->add_option("--encoders", f.encoders, "Directories searched for pretrained encoders");
  cmd->add_option("--threshold", f.threshold, "Decision threshold");
}

RunConfig resolve_config(const CommonFlags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  apply_env(c, process_env());
  if (f.seed) c.seed = c.model.seed = *f.seed;
  if (!f.out.empty()) c.output_dir = f.out;
  if (!f.stopwords.empty()) c.stopwords = f.stopwords;
  if (!f.emoji_map.empty()) c.emoji_map = f.emoji_map;
  if (!f.encoders.empty()) c.encoder_roots.assign(f.encoders.begin(), f.encoders.end());
  if (f.threshold) c.threshold = *f.threshold;
  if (c.stopwords.empty()) c.stopwords = fs::path(CTLAB_DATA_DIR) / "stopwords_bn.txt";
  if (c.emoji_map.empty()) c.emoji_map = fs::path(CTLAB_DATA_DIR) / "emoji_map.json";
  if (!(c.threshold > 0.0 && c.threshold < 1.0)) throw ConfigError("threshold must be in (0, 1)");
  return c;
}

void write_out(const fs::path& dir, const std::string& name, std::string_view contents) {
  fs::create_directories(dir);
  write_file(dir / name, contents);
}

struct TextInput {
  std::vector<std::string> ids;
  std::vector<std::string> texts;
  std::optional<Corpus> corpus;
};

/// .txt: one text per line (ids line-N); otherwise a corpus file.
TextInput read_inputs(const fs::path& path) {
  TextInput in;
  if (path.extension() == ".txt") {
    in.texts = load_external_texts(path);
    for (std::size_t i = 0; i < in.texts.size(); ++i) in.ids.push_back("line-" + std::to_string(i + 1));
    return in;
  }
  in.corpus = load_corpus(path);
  for (const auto& s : in.corpus->samples()) {
    in.ids.push_back(s.id);
    in.texts.push_back(s.text);
  }
  return in;
}

std::vector<std::string> part_ids(const SplitSpec& s, const std::string& part) {
  if (part == "train") return s.train;
  if (part == "val") return s.val;
  if (part == "test") return s.test;
  throw ValidationError("unknown split part '" + part + "' (expected train, val or test)");
}

void restrict_to(TextInput& in, const std::vector<std::string>& ids) {
  if (!in.corpus) throw ValidationError("--split/--part need a corpus input, not plain text");
  Corpus sub = in.corpus->subset(ids);
  in.ids = ids;
  in.texts.clear();
  for (const auto& s : sub.samples()) in.texts.push_back(s.text);
  in.corpus = std::move(sub);
}

void normalize_all(std::vector<std::string>& texts, const PreprocessConfig& pc) {
  for (auto& t : texts) t = normalize(t, pc);
}

double validation_macro_f1(const Checkpoint& ck, const Corpus& corpus, const SplitSpec& splits, double threshold) {
  Corpus val = corpus.subset(splits.val);
  std::vector<std::string> texts;
  std::vector<LabelVector> gold;
  for (const auto& s : val.samples()) {
    texts.push_back(s.text);
    gold.push_back(s.labels);
  }
  const auto probs = ck.predict(texts);
  return evaluate(binarize(probs, threshold), decide_rows(probs, threshold), gold).macro_f1;
}

ClassId class_arg(const std::string& s) {
  auto c = parse_class(s);
  if (!c) throw ValidationError("unknown class '" + s + "'");
  return *c;
}

// --- subcommands -----------------------------------------------------------

struct PrepArgs {
  CommonFlags common;
  std::string corpus, paraphrases;
  std::string tokenizer = "tiny";
};

int cmd_prep(const PrepArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig rc = resolve_config(a.common);
  if (!a.corpus.empty()) rc.corpus = a.corpus;
  if (rc.corpus.empty()) throw ConfigError("prep needs --corpus");
  require_paths({{"corpus", rc.corpus}, {"stopwords", rc.stopwords}, {"emoji map", rc.emoji_map},
                 {"paraphrases", a.paraphrases}});
  const auto pc = load_preprocess_config(rc.stopwords, rc.emoji_map, rc.model.max_tokens);
  Corpus corpus = load_corpus(rc.corpus);

  ojson summary;
  if (!a.paraphrases.empty()) {
    auto batch = ingest_paraphrases(corpus, load_paraphrases(a.paraphrases), pc);
    for (const auto& w : batch.warnings) err << "warning: " << w << "\n";
    corpus = merge_accepted(corpus, batch);
    summary["paraphrases_added"] = batch.size();
  }

  const auto tok = TokenizerRegistry(rc.encoder_roots).resolve(a.tokenizer);
  std::vector<Sample> kept;
  std::vector<std::string> emptied;
  std::size_t truncated = 0, max_len = 0, total_len = 0;
  for (const auto& s : corpus.samples()) {
    Sample n = s;
    n.text = normalize(s.text, pc);
    if (n.text.empty()) {
      emptied.push_back(s.id);
      continue;
    }
    const auto st = token_stats(n.text, *tok, rc.model.max_tokens);
    truncated += st.truncated;
    max_len = std::max<std::size_t>(max_len, static_cast<std::size_t>(st.token_count));
    total_len += static_cast<std::size_t>(st.token_count);
    kept.push_back(std::move(n));
  }
  for (const auto& id : emptied) err << "warning: " << id << " is empty after preprocessing; dropped\n";
  Corpus prepped(std::move(kept));
  write_out(rc.output_dir, "corpus.jsonl", to_jsonl(prepped));

  summary["input"] = corpus.size();
  summary["output"] = prepped.size();
  summary["dropped_empty"] = emptied;
  summary["tokenizer"] = tok->id();
  summary["max_tokens"] = rc.model.max_tokens;
  summary["truncated"] = truncated;
  summary["longest"] = max_len;
  summary["mean_tokens"] = prepped.empty() ? 0.0 : static_cast<double>(total_len) / static_cast<double>(prepped.size());
  const auto all = class_distribution(prepped, false);
  ojson dist;
  for (int c = 0; c < kNumClasses; ++c) dist[std::string(class_key(static_cast<ClassId>(c)))] = all.fraction[c];
  dist["nonviolent"] = all.nonviolent;
  summary["distribution"] = dist;
  write_out(rc.output_dir, "prep_summary.json", summary.dump(2) + "\n");
  out << "prepped " << prepped.size() << " of " << corpus.size() << " samples -> "
      << (rc.output_dir / "corpus.jsonl").string() << " (" << truncated << " over " << rc.model.max_tokens
      << " tokens)\n";
  return kExitOk;
}

struct SplitArgs {
  CommonFlags common;
  std::string corpus;
};

int cmd_split(const SplitArgs& a, std::ostream& out) {
  RunConfig rc = resolve_config(a.common);
  if (!a.corpus.empty()) rc.corpus = a.corpus;
  if (rc.corpus.empty()) throw ConfigError("split needs --corpus");
  require_paths({{"corpus", rc.corpus}});
  const auto s = split(load_corpus(rc.corpus), rc.seed);
  write_out(rc.output_dir, "split.json", split_to_json(s));
  out << "train " << s.train.size() << " / val " << s.val.size() << " / test " << s.test.size() << " -> "
      << (rc.output_dir / "split.json").string() << "\n";
  return kExitOk;
}

struct TrainArgs {
  CommonFlags common;
  std::string corpus, split_file, checkpoint_dir, encoder;
  std::optional<int> epochs, batch_size, patience, max_tokens;
  std::optional<double> lr;
  bool no_class_weights = false;
  bool tune = false;
  int budget = 10;
  std::string strategy = "tpe";
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  RunConfig rc = resolve_config(a.common);
  if (!a.corpus.empty()) rc.corpus = a.corpus;
  if (!a.checkpoint_dir.empty()) rc.checkpoint_dir = a.checkpoint_dir;
  if (!a.encoder.empty()) rc.model.encoder_id = a.encoder;
  if (a.epochs) rc.model.epochs = *a.epochs;
  if (a.batch_size) rc.model.batch_size = *a.batch_size;
  if (a.patience) rc.model.patience = *a.patience;
  if (a.max_tokens) rc.model.max_tokens = *a.max_tokens;
  if (a.lr) rc.model.learning_rate = *a.lr;
  if (a.no_class_weights) rc.model.use_class_weights = false;
  rc.model.seed = rc.seed;
  if (rc.corpus.empty()) throw ConfigError("train needs --corpus");
  if (rc.checkpoint_dir.empty()) rc.checkpoint_dir = rc.output_dir / "checkpoint";
  require_paths({{"corpus", rc.corpus}, {"split", a.split_file}});
  rc.model.validate();
  const EncoderRegistry registry(rc.encoder_roots);
  registry.resolve(rc.model.encoder_id);

  const Corpus corpus = load_corpus(rc.corpus);
  SplitSpec splits = a.split_file.empty() ? split(corpus, rc.seed) : split_from_json(read_file(a.split_file));
  if (a.split_file.empty()) write_out(rc.output_dir, "split.json", split_to_json(splits));

  ModelConfig config = rc.model;
  if (a.tune) {
    TuneOptions opt;
    opt.budget = a.budget;
    opt.seed = rc.seed;
    if (a.strategy == "random") opt.strategy = TuneStrategy::Random;
    else if (a.strategy != "tpe") throw ConfigError("unknown tuning strategy '" + a.strategy + "' (tpe or random)");
    fs::create_directories(rc.output_dir);
    auto result = tune(
        config, SearchSpace{}, opt,
        [&](const ModelConfig& m) {
          auto r = train(m, splits, corpus, registry);
          return validation_macro_f1(r.checkpoint, corpus, splits, rc.threshold);
        },
        rc.output_dir / "tune_trials.jsonl");
    config = result.best;
    out << "tuned: learning_rate " << format_double(config.learning_rate, 6) << ", batch_size " << config.batch_size
        << " (validation macro F1 " << format_double(*result.best_trial.objective, 4) << ")\n";
  }

  auto result = train(config, splits, corpus, registry, rc.checkpoint_dir);
  const double f1 = validation_macro_f1(result.checkpoint, corpus, splits, rc.threshold);
  out << "best epoch " << result.history.best_epoch << " of " << result.history.stop_epoch
      << (result.history.early_stopped ? " (early stop)" : "") << ", validation macro F1 " << format_double(f1, 4)
      << " -> " << rc.checkpoint_dir.string() << "\n";
  return kExitOk;
}

struct PredictArgs {
  CommonFlags common;
  std::string checkpoint, input, split_file, part;
  bool normalize = false;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  RunConfig rc = resolve_config(a.common);
  fs::path ck_dir = a.checkpoint.empty() ? rc.checkpoint_dir : fs::path(a.checkpoint);
  if (ck_dir.empty()) throw ConfigError("predict needs --checkpoint");
  require_paths({{"checkpoint", ck_dir}, {"input", a.input}, {"split", a.split_file}});
  if (a.normalize) require_paths({{"stopwords", rc.stopwords}, {"emoji map", rc.emoji_map}});
  const Checkpoint ck = Checkpoint::load(ck_dir);
  TextInput in = read_inputs(a.input);
  if (!a.part.empty()) {
    if (a.split_file.empty()) throw ConfigError("--part needs --split");
    restrict_to(in, part_ids(split_from_json(read_file(a.split_file)), a.part));
  }
  if (a.normalize) normalize_all(in.texts, load_preprocess_config(rc.stopwords, rc.emoji_map));
  const auto probs = ck.predict(in.texts);
  const auto decisions = decide_rows(probs, rc.threshold);
  write_out(rc.output_dir, "predictions.jsonl", predictions_to_jsonl(in.ids, probs, decisions));
  out << "predicted " << in.ids.size() << " rows -> " << (rc.output_dir / "predictions.jsonl").string() << "\n";
  return kExitOk;
}

struct EnsembleArgs {
  CommonFlags common;
  std::string spec, input, split_file, part, combiner, corpus;
  std::vector<std::string> member_preds;
  bool fit_stacker = false;
};

int cmd_ensemble(const EnsembleArgs& a, std::ostream& out) {
  RunConfig rc = resolve_config(a.common);
  fs::path spec_path = a.spec.empty() ? rc.ensemble : fs::path(a.spec);
  require_paths({{"spec", spec_path}, {"input", a.input}, {"split", a.split_file}, {"corpus", a.corpus}});
  for (const auto& m : a.member_preds) require_paths({{"member predictions", m}});

  if (!a.member_preds.empty()) {
    if (a.combiner.empty()) throw ConfigError("--member-preds needs --combiner");
    if (a.member_preds.size() != kEnsembleSize) throw ValidationError("--member-preds takes exactly 5 files");
    const auto first = read_predictions(a.member_preds.front());
    std::vector<ProbabilityMatrix> members;
    for (const auto& m : a.member_preds) members.push_back(align_to(read_predictions(m), first.ids).probs);
    const Combiner comb = parse_combiner(a.combiner);
    std::optional<StackerModel> stacker;
    if (comb == Combiner::Stacker) {
      if (spec_path.empty()) throw ConfigError("stacker combination needs --spec naming the stacker file");
      stacker = StackerModel::from_json(read_file(load_ensemble_spec(spec_path, spec_path.parent_path()).stacker));
    }
    auto res = combine(std::move(members), comb, rc.threshold, stacker ? &*stacker : nullptr);
    write_out(rc.output_dir, "predictions.jsonl", predictions_to_jsonl(first.ids, res.scores, res.decisions));
    out << "combined " << first.ids.size() << " rows (" << to_string(comb) << ") -> "
        << (rc.output_dir / "predictions.jsonl").string() << "\n";
    return kExitOk;
  }

  if (spec_path.empty()) throw ConfigError("ensemble needs --spec or --member-preds");
  auto spec = load_ensemble_spec(spec_path, spec_path.parent_path());
  if (!a.combiner.empty()) spec.combiner = parse_combiner(a.combiner);
  if (a.common.threshold) spec.threshold = rc.threshold;

  if (a.fit_stacker) {
    if (a.corpus.empty() || a.split_file.empty()) throw ConfigError("--fit-stacker needs --corpus and --split");
    const auto members = load_members(spec);
    const Corpus corpus = load_corpus(a.corpus);
    const SplitSpec splits = split_from_json(read_file(a.split_file));
    const Corpus val = corpus.subset(splits.val);
    std::vector<std::string> texts;
    std::vector<LabelVector> labels;
    for (const auto& s : val.samples()) {
      texts.push_back(s.text);
      labels.push_back(s.labels);
    }
    std::vector<ProbabilityMatrix> preds;
    for (const auto& m : members) preds.push_back(m->predict(texts));
    StackerOptions opt;
    opt.seed = rc.seed;
    const auto model = train_stacker(preds, labels, splits.val, splits, opt);
    write_out(rc.output_dir, "stacker.json", model.to_json());
    out << "stacker fitted on " << splits.val.size() << " validation rows -> "
        << (rc.output_dir / "stacker.json").string() << "\n";
    return kExitOk;
  }

  if (a.input.empty()) throw ConfigError("ensemble needs --input");
  TextInput in = read_inputs(a.input);
  if (!a.part.empty()) {
    if (a.split_file.empty()) throw ConfigError("--part needs --split");
    restrict_to(in, part_ids(split_from_json(read_file(a.split_file)), a.part));
  }
  spec.validate();
  auto res = run_ensemble(spec, in.texts);
  write_out(rc.output_dir, "predictions.jsonl", predictions_to_jsonl(in.ids, res.scores, res.decisions));
  for (std::size_t k = 0; k < res.member_predictions.size(); ++k)
    write_out(rc.output_dir, "member_" + std::to_string(k + 1) + ".jsonl",
              predictions_to_jsonl(in.ids, res.member_predictions[k], decide_rows(res.member_predictions[k], spec.threshold)));
  out << "ensemble '" << spec.name << "' (" << to_string(spec.combiner) << ") on " << in.ids.size() << " rows -> "
      << (rc.output_dir / "predictions.jsonl").string() << "\n";
  return kExitOk;
}

struct EvalArgs {
  CommonFlags common;
  std::string pred, gold, split_file, part, title;
  std::size_t sample = 0;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  RunConfig rc = resolve_config(a.common);
  require_paths({{"predictions", a.pred}, {"gold", a.gold}, {"split", a.split_file}});
  const Corpus gold = load_corpus(a.gold);
  ScoredRows rows = read_predictions(a.pred);
  if (!a.part.empty()) {
    if (a.split_file.empty()) throw ConfigError("--part needs --split");
    rows = align_to(rows, part_ids(split_from_json(read_file(a.split_file)), a.part));
  }
  if (rows.ids.empty()) throw EmptyInputError("no predictions to evaluate");
  std::vector<LabelVector> labels;
  for (const auto& id : rows.ids) {
    const auto* s = gold.find(id);
    if (!s) throw ValidationError("prediction id '" + id + "' is not in the gold corpus");
    labels.push_back(s->labels);
  }
  const bool have_decisions = std::all_of(rows.decisions.begin(), rows.decisions.end(), [](const auto& d) { return d.has_value(); });
  std::vector<DecisionLabel> decisions;
  if (have_decisions)
    for (const auto& d : rows.decisions) decisions.push_back(*d);
  else
    decisions = decide_rows(rows.probs, rc.threshold);

  const auto report = evaluate(binarize(rows.probs, rc.threshold), decisions, labels);
  write_out(rc.output_dir, "metrics.json", to_json(report));
  write_out(rc.output_dir, "confusion.csv", confusion_csv(report.confusion));
  write_out(rc.output_dir, "confusion.svg", confusion_svg(report.confusion, a.title));
  auto mis = misclassification_report(gold, rows.ids, decisions, rows.probs);
  if (a.sample > 0) mis = subsample(mis, a.sample, rc.seed);
  write_out(rc.output_dir, "misclassified.jsonl", misclassifications_to_jsonl(mis));
  out << render_table(report, a.title);
  return kExitOk;
}

struct ExplainArgs {
  CommonFlags common;
  std::string checkpoint, text, input, cls = "auto";
  int samples = 1000, features = 10;
  std::size_t limit = 20;
  bool normalize = false;
};

int cmd_explain(const ExplainArgs& a, std::ostream& out) {
  RunConfig rc = resolve_config(a.common);
  fs::path ck_dir = a.checkpoint.empty() ? rc.checkpoint_dir : fs::path(a.checkpoint);
  if (ck_dir.empty()) throw ConfigError("explain needs --checkpoint");
  require_paths({{"checkpoint", ck_dir}, {"input", a.input}});
  if (a.text.empty() == a.input.empty()) throw ConfigError("explain needs exactly one of --text or --input");
  if (a.normalize) require_paths({{"stopwords", rc.stopwords}, {"emoji map", rc.emoji_map}});
  const Checkpoint ck = Checkpoint::load(ck_dir);
  std::vector<std::string> texts;
  if (!a.text.empty()) texts.push_back(a.text);
  else texts = read_inputs(a.input).texts;
  if (texts.size() > a.limit) texts.resize(a.limit);
  if (a.normalize) normalize_all(texts, load_preprocess_config(rc.stopwords, rc.emoji_map));

  ExplainOptions opt;
  opt.n_samples = a.samples;
  opt.n_features = a.features;
  opt.seed = rc.seed;
  std::vector<Explanation> all;
  std::string json = "[\n";
  for (std::size_t i = 0; i < texts.size(); ++i) {
    ClassId target;
    if (a.cls == "auto") {
      const auto p = ck.predict(std::span<const std::string>(&texts[i], 1));
      Eigen::Index best;
      p.row(0).maxCoeff(&best);
      target = static_cast<ClassId>(best);
    } else {
      target = class_arg(a.cls);
    }
    all.push_back(explain(texts[i], ck, target, opt));
    json += explanation_json(all.back());
    if (i + 1 < texts.size()) json += ",\n";
  }
  json += "]\n";
  write_out(rc.output_dir, "explanations.json", json);
  write_out(rc.output_dir, "explanations.html", explanation_html(all));
  for (const auto& e : all) {
    out << class_key(e.target_class) << " (fit " << format_double(e.surrogate_fit, 3) << "):";
    for (const auto& [tok, w] : e.features) out << " " << tok << "=" << format_double(w, 4);
    out << "\n";
  }
  return kExitOk;
}

struct DiagnoseArgs {
  CommonFlags common;
  std::string corpus, cls = "religio", pairs, pred, gold, triggers;
  std::vector<std::string> encoders;
  std::size_t top = 20;
  std::string gold_class = "noncommunal", pred_class = "religio";
};

int cmd_diagnose(const DiagnoseArgs& a, std::ostream& out) {
  RunConfig rc = resolve_config(a.common);
  require_paths({{"corpus", a.corpus}, {"pairs", a.pairs}, {"predictions", a.pred}, {"gold", a.gold},
                 {"triggers", a.triggers}});
  bool did = false;
  if (!a.corpus.empty()) {
    const auto words = frequent_words(load_corpus(a.corpus), class_arg(a.cls), a.top);
    ojson j = ojson::array();
    for (const auto& w : words) j.push_back({{"word", w.word}, {"count", w.count}});
    write_out(rc.output_dir, "frequent_words_" + a.cls + ".json", j.dump(2) + "\n");
    out << "frequent " << a.cls << " words:";
    for (const auto& w : words) out << " " << w.word << "(" << w.count << ")";
    out << "\n";
    did = true;
  }
  if (!a.pairs.empty()) {
    if (a.encoders.empty()) throw ConfigError("--pairs needs at least one --encoder");
    std::vector<std::pair<std::string, std::string>> pairs;
    const auto rows = parse_csv(read_file(a.pairs));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& f = rows[i].fields;
      if (i == 0 && !f.empty() && f[0] == "word_a") continue;
      if (f.size() != 2) throw ParseError("expected word_a,word_b", rows[i].line);
      pairs.emplace_back(f[0], f[1]);
    }
    const EncoderRegistry registry(rc.encoder_roots);
    std::vector<EmbeddingSource> sources;
    for (const auto& e : a.encoders) {
      if (fs::exists(fs::path(e) / "weights.bin")) {
        auto src = embedding_source(Checkpoint::load(e));
        src.encoder_id = fs::path(e).filename().string();
        sources.push_back(std::move(src));
      } else {
        sources.push_back(embedding_source(registry, e));
      }
    }
    const auto table = similarity_table(pairs, sources);
    const auto csv = similarity_csv(table);
    write_out(rc.output_dir, "similarity.csv", csv);
    out << csv;
    did = true;
  }
  if (!a.pred.empty()) {
    if (a.gold.empty() || a.triggers.empty()) throw ConfigError("trigger coverage needs --pred, --gold and --triggers");
    const Corpus gold = load_corpus(a.gold);
    const auto rows = read_predictions(a.pred);
    const auto want_gold = *parse_decision(std::string(class_key(class_arg(a.gold_class))));
    const auto want_pred = *parse_decision(std::string(class_key(class_arg(a.pred_class))));
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < rows.ids.size(); ++i) {
      const auto* s = gold.find(rows.ids[i]);
      if (!s) throw ValidationError("prediction id '" + rows.ids[i] + "' is not in the gold corpus");
      const auto d = rows.decisions[i] ? *rows.decisions[i] : decide(rows.probs.row(static_cast<Eigen::Index>(i)), rc.threshold);
      if (s->labels.decision() == want_gold && d == want_pred) texts.push_back(s->text);
    }
    const auto triggers = load_trigger_words(a.triggers);
    ojson j;
    j["gold_class"] = a.gold_class;
    j["pred_class"] = a.pred_class;
    j["misclassified"] = texts.size();
    j["coverage"] = texts.empty() ? ojson(nullptr) : ojson(trigger_coverage(texts, triggers));
    write_out(rc.output_dir, "trigger_coverage.json", j.dump(2) + "\n");
    out << "trigger coverage over " << texts.size() << " " << a.gold_class << "->" << a.pred_class
        << " errors: " << (texts.empty() ? std::string("n/a") : format_double(trigger_coverage(texts, triggers), 4))
        << "\n";
    did = true;
  }
  if (!did) throw ConfigError("diagnose needs --corpus, --pairs or --pred");
  return kExitOk;
}

struct MineArgs {
  CommonFlags common;
  std::string checkpoint, external, source = "external";
  std::optional<double> mine_threshold;
  bool normalize = false;
};

int cmd_mine(const MineArgs& a, std::ostream& out) {
  RunConfig rc = resolve_config(a.common);
  fs::path ck_dir = a.checkpoint.empty() ? rc.checkpoint_dir : fs::path(a.checkpoint);
  if (ck_dir.empty()) throw ConfigError("mine needs --checkpoint");
  require_paths({{"checkpoint", ck_dir}, {"external corpus", a.external}});
  if (a.external.empty()) throw ConfigError("mine needs --external");
  if (a.normalize) require_paths({{"stopwords", rc.stopwords}, {"emoji map", rc.emoji_map}});
  const Checkpoint ck = Checkpoint::load(ck_dir);
  auto texts = load_external_texts(a.external);
  if (a.normalize) {
    normalize_all(texts, load_preprocess_config(rc.stopwords, rc.emoji_map));
    std::erase_if(texts, [](const auto& t) { return t.empty(); });
  }
  const auto cands = mine_candidates(texts, ck, a.mine_threshold.value_or(kDefaultMiningThreshold), a.source);
  write_out(rc.output_dir, "candidates.jsonl", candidates_to_jsonl(cands));
  out << cands.size() << " of " << texts.size() << " texts kept -> " << (rc.output_dir / "candidates.jsonl").string()
      << "\n";
  return kExitOk;
}

struct ServeArgs {
  CommonFlags common;
  std::string state_dir, roles, candidates, ui, host = "127.0.0.1";
  int port = 8080;
};

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  RunConfig rc = resolve_config(a.common);
  fs::path state = a.state_dir.empty() ? rc.output_dir / "annotation" : fs::path(a.state_dir);
  require_paths({{"roles", a.roles}, {"candidates", a.candidates}, {"ui", a.ui}});
  if (a.roles.empty()) throw ConfigError("annotate-serve needs --roles");
  AnnotationStore store(load_annotation_options(a.roles), state);
  if (!a.candidates.empty()) {
    const auto n = store.add_candidates(parse_candidates_jsonl(read_file(a.candidates)));
    out << "queued " << n << " new candidates\n";
  }
  AnnotationServer server(store, a.ui);
  const int port = server.bind(a.host, a.port);
  out << "listening on http://" << a.host << ":" << port << " (state in " << state.string() << ")" << std::endl;
  server.serve();
  return kExitOk;
}

struct ExportArgs {
  CommonFlags common;
  std::string state_dir, roles, adjudicator, merge_into;
};

int cmd_export(const ExportArgs& a, std::ostream& out) {
  RunConfig rc = resolve_config(a.common);
  fs::path state = a.state_dir.empty() ? rc.output_dir / "annotation" : fs::path(a.state_dir);
  require_paths({{"state dir", state}, {"roles", a.roles}, {"corpus", a.merge_into}});
  if (a.roles.empty()) throw ConfigError("export-annotations needs --roles");
  if (a.adjudicator.empty()) throw ConfigError("export-annotations needs --adjudicator");
  AnnotationStore store(load_annotation_options(a.roles), state);
  const auto batch = store.export_batch(a.adjudicator);
  write_out(rc.output_dir, "annotations_batch.jsonl", to_jsonl(batch.samples()));
  out << batch.size() << " annotated samples (";
  for (int c = 0; c < kNumClasses; ++c)
    out << (c ? ", " : "") << class_key(static_cast<ClassId>(c)) << " +" << batch.counts()[c];
  out << ")\n";
  if (!a.merge_into.empty()) {
    const Corpus merged = merge_accepted(load_corpus(a.merge_into), batch);
    write_out(rc.output_dir, "merged_corpus.jsonl", to_jsonl(merged));
    out << "merged corpus: " << merged.size() << " samples\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Communal-violence text classification workbench", "ctlab"};
  app.require_subcommand(1);

  PrepArgs prep;
  auto* c_prep = app.add_subcommand("prep", "Normalize a corpus, optionally adding paraphrases");
  add_common(c_prep, prep.common);
  c_prep->add_option("--corpus", prep.corpus, "Corpus CSV/JSONL");
  c_prep->add_option("--paraphrases", prep.paraphrases, "CSV source_id,paraphrased_text");
  c_prep->add_option("--tokenizer", prep.tokenizer, "Tokenizer for length accounting");

  SplitArgs sp;
  auto* c_split = app.add_subcommand("split", "Stratified train/val/test split");
  add_common(c_split, sp.common);
  c_split->add_option("--corpus", sp.corpus, "Corpus CSV/JSONL");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a classifier checkpoint");
  add_common(c_train, tr.common);
  c_train->add_option("--corpus", tr.corpus, "Preprocessed corpus");
  c_train->add_option("--split", tr.split_file, "split.json (computed from the seed when absent)");
  c_train->add_option("--checkpoint-dir", tr.checkpoint_dir, "Where the best checkpoint goes");
  c_train->add_option("--encoder", tr.encoder, "Encoder id or pretrained directory");
  c_train->add_option("--epochs", tr.epochs);
  c_train->add_option("--batch-size", tr.batch_size);
  c_train->add_option("--lr", tr.lr);
  c_train->add_option("--patience", tr.patience);
  c_train->add_option("--max-tokens", tr.max_tokens);
  c_train->add_flag("--no-class-weights", tr.no_class_weights);
  c_train->add_flag("--tune", tr.tune, "Search learning rate and batch size first");
  c_train->add_option("--budget", tr.budget, "Tuning trials");
  c_train->add_option("--strategy", tr.strategy, "tpe or random");

  PredictArgs pr;
  auto* c_predict = app.add_subcommand("predict", "Score texts with a checkpoint");
  add_common(c_predict, pr.common);
  c_predict->add_option("--checkpoint", pr.checkpoint);
  c_predict->add_option("--input", pr.input, "Corpus file or .txt with one text per line")->required();
  c_predict->add_option("--split", pr.split_file);
  c_predict->add_option("--part", pr.part, "train, val or test");
  c_predict->add_flag("--normalize", pr.normalize, "Preprocess inputs first");

  EnsembleArgs en;
  auto* c_ens = app.add_subcommand("ensemble", "Run or recombine a five-member ensemble");
  add_common(c_ens, en.common);
  c_ens->add_option("--spec", en.spec, "Ensemble spec JSON");
  c_ens->add_option("--input", en.input);
  c_ens->add_option("--split", en.split_file);
  c_ens->add_option("--part", en.part);
  c_ens->add_option("--combiner", en.combiner, "mean, vote or stacker");
  c_ens->add_option("--member-preds", en.member_preds, "Five prediction files to combine offline");
  c_ens->add_flag("--fit-stacker", en.fit_stacker, "Fit the stacker on validation predictions");
  c_ens->add_option("--corpus", en.corpus);

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Score predictions against gold labels");
  add_common(c_eval, ev.common);
  c_eval->add_option("--pred", ev.pred)->required();
  c_eval->add_option("--gold", ev.gold)->required();
  c_eval->add_option("--split", ev.split_file);
  c_eval->add_option("--part", ev.part);
  c_eval->add_option("--title", ev.title);
  c_eval->add_option("--sample", ev.sample, "Keep a seeded sample of k misclassified rows");

  ExplainArgs ex;
  auto* c_explain = app.add_subcommand("explain", "Local surrogate explanations");
  add_common(c_explain, ex.common);
  c_explain->add_option("--checkpoint", ex.checkpoint);
  c_explain->add_option("--text", ex.text);
  c_explain->add_option("--input", ex.input);
  c_explain->add_option("--class", ex.cls, "Target class or auto");
  c_explain->add_option("--samples", ex.samples);
  c_explain->add_option("--features", ex.features);
  c_explain->add_option("--limit", ex.limit, "Maximum texts taken from --input");
  c_explain->add_flag("--normalize", ex.normalize);

  DiagnoseArgs dg;
  auto* c_diag = app.add_subcommand("diagnose", "Frequent words, embedding similarity, trigger coverage");
  add_common(c_diag, dg.common);
  c_diag->add_option("--corpus", dg.corpus);
  c_diag->add_option("--class", dg.cls);
  c_diag->add_option("--top", dg.top);
  c_diag->add_option("--pairs", dg.pairs, "CSV word_a,word_b");
  c_diag->add_option("--encoder", dg.encoders, "Checkpoint dir or pretrained encoder id (repeatable)");
  c_diag->add_option("--pred", dg.pred);
  c_diag->add_option("--gold", dg.gold);
  c_diag->add_option("--triggers", dg.triggers);
  c_diag->add_option("--gold-class", dg.gold_class);
  c_diag->add_option("--pred-class", dg.pred_class);

  MineArgs mi;
  auto* c_mine = app.add_subcommand("mine", "Pick candidate comments from an external corpus");
  add_common(c_mine, mi.common);
  c_mine->add_option("--checkpoint", mi.checkpoint);
  c_mine->add_option("--external", mi.external, "Plain text or JSONL with a text field")->required();
  c_mine->add_option("--min-score", mi.mine_threshold, "Minimum top-class probability (default 0.5)");
  c_mine->add_option("--source", mi.source);
  c_mine->add_flag("--normalize", mi.normalize);

  ServeArgs sv;
  auto* c_serve = app.add_subcommand("annotate-serve", "Blind-voting annotation server");
  add_common(c_serve, sv.common);
  c_serve->add_option("--state-dir", sv.state_dir);
  c_serve->add_option("--roles", sv.roles, "JSON with roles and session settings");
  c_serve->add_option("--candidates", sv.candidates, "candidates.jsonl to queue");
  c_serve->add_option("--ui", sv.ui, "Static UI bundle directory");
  c_serve->add_option("--host", sv.host);
  c_serve->add_option("--port", sv.port);

  ExportArgs xp;
  auto* c_export = app.add_subcommand("export-annotations", "Export agreed and resolved annotations");
  add_common(c_export, xp.common);
  c_export->add_option("--state-dir", xp.state_dir);
  c_export->add_option("--roles", xp.roles);
  c_export->add_option("--adjudicator", xp.adjudicator);
  c_export->add_option("--merge-into", xp.merge_into, "Corpus to merge the batch into");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitValidation;
  }

  try {
    if (c_prep->parsed()) return cmd_prep(prep, out, err);
    if (c_split->parsed()) return cmd_split(sp, out);
    if (c_train->parsed()) return cmd_train(tr, out);
    if (c_predict->parsed()) return cmd_predict(pr, out);
    if (c_ens->parsed()) return cmd_ensemble(en, out);
    if (c_eval->parsed()) return cmd_eval(ev, out);
    if (c_explain->parsed()) return cmd_explain(ex, out);
    if (c_diag->parsed()) return cmd_diagnose(dg, out);
    if (c_mine->parsed()) return cmd_mine(mi, out);
    if (c_serve->parsed()) return cmd_serve(sv, out);
    if (c_export->parsed()) return cmd_export(xp, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const AuthorizationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace ctlab
