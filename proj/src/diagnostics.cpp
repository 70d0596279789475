#include "ctlab/diagnostics.hpp"

#include "ctlab/preprocess.hpp"
#include "ctlab/random.hpp"
#include "ctlab/trainer.hpp"
#include "ctlab/util.hpp"

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <numeric>
#include <unordered_map>

namespace ctlab {

std::vector<WordCount> frequent_words(const Corpus& corpus, ClassId cls, std::size_t k) {
  std::unordered_map<std::string, std::size_t> counts;
  std::size_t members = 0;
  for (const auto& s : corpus.samples()) {
    if (!s.labels[cls]) continue;
    ++members;
    for (auto& w : split_whitespace(s.text)) ++counts[std::move(w)];
  }
  if (members == 0) throw EmptyInputError("no samples labeled " + std::string(class_key(cls)));
  std::vector<WordCount> out;
  out.reserve(counts.size());
  for (auto& [w, n] : counts) out.push_back({w, n});
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.count != b.count ? a.count > b.count : a.word < b.word; });
  if (out.size() > k) out.resize(k);
  return out;
}

EmbeddingSource embedding_source(const Checkpoint& checkpoint) {
  return {checkpoint.encoder().id, checkpoint.tokenizer_ptr(), checkpoint.net().embedding};
}

EmbeddingSource embedding_source(const EncoderRegistry& registry, std::string_view encoder_id) {
  const auto spec = registry.resolve(encoder_id);
  if (spec.kind != EncoderKind::Pretrained)
    throw ConfigError("encoder '" + std::string(encoder_id) +
                      "' has no pretrained embeddings; pass a trained checkpoint directory instead");
  return {spec.id, registry.tokenizer(spec), registry.pretrained_embeddings(spec)};
}

Eigen::VectorXd word_vector(std::string_view word, const EmbeddingSource& source) {
  const auto ids = source.tokenizer->word_ids(word);
  if (ids.empty()) throw ValidationError("'" + std::string(word) + "' produces no subword tokens");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(source.table.cols());
  for (int id : ids) {
    if (id < 0 || id >= source.table.rows())
      throw ValidationError("token id " + std::to_string(id) + " outside the embedding table");
    v += source.table.row(id).transpose();
  }
  return v / static_cast<double>(ids.size());
}

SimilarityTable similarity_table(std::span<const std::pair<std::string, std::string>> pairs,
                                 std::span<const EmbeddingSource> sources) {
  SimilarityTable out;
  for (const auto& [a, b] : pairs)
    for (const auto& src : sources)
      out.push_back({a, b, src.encoder_id, cosine(word_vector(a, src), word_vector(b, src))});
  return out;
}

std::string similarity_csv(const SimilarityTable& table) {
  std::vector<std::string> encoders;
  std::vector<std::pair<std::string, std::string>> pairs;
  std::map<std::pair<std::string, std::string>, std::map<std::string, double>> cells;
  for (const auto& r : table) {
    if (std::find(encoders.begin(), encoders.end(), r.encoder_id) == encoders.end()) encoders.push_back(r.encoder_id);
    auto key = std::make_pair(r.word_a, r.word_b);
    if (!cells.contains(key)) pairs.push_back(key);
    cells[key][r.encoder_id] = r.cosine;
  }
  std::string out = "word_a,word_b";
  for (const auto& e : encoders) out += "," + e;
  out += "\n";
  for (const auto& key : pairs) {
    out += key.first + "," + key.second;
    for (const auto& e : encoders) {
      auto it = cells[key].find(e);
      out += "," + (it == cells[key].end() ? std::string() : format_double(it->second, 4));
    }
    out += "\n";
  }
  return out;
}

Explanation explain(std::string_view text, const Predictor& model, ClassId target_class,
                    const ExplainOptions& opt) {
  if (opt.n_samples < 2) throw ValidationError("explain: n_samples must be at least 2");
  if (opt.n_features < 1) throw ValidationError("explain: n_features must be positive");
  const auto tokens = split_whitespace(text);
  if (tokens.empty()) throw EmptyInputError("explain: text has no tokens");

  std::vector<std::string> features;
  std::vector<int> feature_of(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto it = std::find(features.begin(), features.end(), tokens[i]);
    feature_of[i] = static_cast<int>(it - features.begin());
    if (it == features.end()) features.push_back(tokens[i]);
  }
  const int d = static_cast<int>(features.size());
  const int n = opt.n_samples;

  // Row 0 is the unperturbed text; the rest delete a random number of features.
  Rng rng = Rng::substream(opt.seed, "explain");
  Eigen::MatrixXd z = Eigen::MatrixXd::Ones(n, d);
  std::vector<int> order(static_cast<std::size_t>(d));
  for (int r = 1; r < n; ++r) {
    const int hi = d > 1 ? d - 1 : 1;
    const int removed = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi)));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<int>(order));
    for (int k = 0; k < removed; ++k) z(r, order[static_cast<std::size_t>(k)]) = 0.0;
  }

  std::vector<std::string> perturbed(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    std::string& s = perturbed[static_cast<std::size_t>(r)];
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (z(r, feature_of[i]) == 0.0) continue;
      if (!s.empty()) s += ' ';
      s += tokens[i];
    }
  }
  const ProbabilityMatrix scores = model.predict(perturbed);
  const Eigen::VectorXd y = scores.col(static_cast<int>(target_class));

  // Cosine distance to the all-ones mask, exponential kernel.
  const double width = 0.25 * std::sqrt(static_cast<double>(d));
  Eigen::VectorXd w(n);
  for (int r = 0; r < n; ++r) {
    const double kept = z.row(r).sum();
    const double dist = kept > 0 ? 1.0 - std::sqrt(kept / d) : 1.0;
    w(r) = std::sqrt(std::exp(-(dist * dist) / (width * width)));
  }

  const double wsum = w.sum();
  const Eigen::RowVectorXd x_mean = (w.transpose() * z) / wsum;
  const double y_mean = w.dot(y) / wsum;
  const Eigen::MatrixXd xc = z.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;
  Eigen::MatrixXd gram = xc.transpose() * w.asDiagonal() * xc;
  gram.diagonal().array() += opt.ridge_alpha;
  const Eigen::VectorXd beta = gram.ldlt().solve(xc.transpose() * w.asDiagonal() * yc);

  const Eigen::VectorXd resid = yc - xc * beta;
  const double ss_res = w.dot(resid.cwiseProduct(resid));
  const double ss_tot = w.dot(yc.cwiseProduct(yc));

  Explanation e;
  e.text = std::string(text);
  e.target_class = target_class;
  e.intercept = y_mean - x_mean.dot(beta);
  e.surrogate_fit = ss_tot > 0 ? 1.0 - ss_res / ss_tot : (ss_res > 0 ? 0.0 : 1.0);
  e.base_score = y(0);
  e.seed = opt.seed;
  e.n_samples = n;
  std::vector<int> idx(static_cast<std::size_t>(d));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return std::abs(beta(a)) > std::abs(beta(b)); });
  const int keep = std::min(opt.n_features, d);
  for (int k = 0; k < keep; ++k) {
    const int f = idx[static_cast<std::size_t>(k)];
    e.features.emplace_back(features[static_cast<std::size_t>(f)], beta(f));
  }
  return e;
}

std::string explanation_json(const Explanation& e) {
  nlohmann::ordered_json j;
  j["text"] = e.text;
  j["target_class"] = std::string(class_key(e.target_class));
  nlohmann::ordered_json feats = nlohmann::ordered_json::array();
  for (const auto& [tok, wt] : e.features) feats.push_back({{"token", tok}, {"weight", wt}});
  j["features"] = std::move(feats);
  j["intercept"] = e.intercept;
  j["surrogate_fit"] = e.surrogate_fit;
  j["base_score"] = e.base_score;
  j["seed"] = e.seed;
  j["n_samples"] = e.n_samples;
  return j.dump(2) + "\n";
}

namespace {

std::string html_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string explanation_html(const std::vector<Explanation>& explanations) {
  std::string out =
      "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>Explanations</title>\n"
      "<style>body{font-family:sans-serif;max-width:60em;margin:2em auto}"
      ".t{line-height:2;font-size:1.2em}span.w{padding:2px 3px;border-radius:3px}"
      "table{border-collapse:collapse}td{padding:2px 8px}</style></head><body>\n";
  for (const auto& e : explanations) {
    std::map<std::string, double> weight;
    double scale = 1e-12;
    for (const auto& [tok, w] : e.features) {
      weight[tok] = w;
      scale = std::max(scale, std::abs(w));
    }
    out += "<section><h3>" + html_escape(class_key(e.target_class)) + " (score " + format_double(e.base_score, 4) +
           ", fit " + format_double(e.surrogate_fit, 3) + ")</h3>\n<p class=\"t\">";
    for (const auto& tok : split_whitespace(e.text)) {
      auto it = weight.find(tok);
      if (it == weight.end()) {
        out += html_escape(tok) + " ";
        continue;
      }
      const double a = std::abs(it->second) / scale;
      const std::string rgb = it->second >= 0 ? "46,160,67" : "214,39,40";
      out += "<span class=\"w\" title=\"" + format_double(it->second, 4) + "\" style=\"background:rgba(" + rgb + "," +
             format_double(0.15 + 0.7 * a, 3) + ")\">" + html_escape(tok) + "</span> ";
    }
    out += "</p>\n<table>";
    for (const auto& [tok, w] : e.features)
      out += "<tr><td>" + html_escape(tok) + "</td><td>" + format_double(w, 4) + "</td></tr>";
    out += "</table></section>\n";
  }
  out += "</body></html>\n";
  return out;
}

std::set<std::string> load_trigger_words(const std::filesystem::path& path) { return load_stopwords(path); }

double trigger_coverage(std::span<const std::string> texts, const std::set<std::string>& triggers) {
  if (texts.empty()) throw EmptyInputError("trigger_coverage: no samples");
  std::size_t hit = 0;
  for (const auto& t : texts) {
    const auto toks = split_whitespace(t);
    if (std::any_of(toks.begin(), toks.end(), [&](const auto& w) { return triggers.contains(w); })) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(texts.size());
}

}  // namespace ctlab
