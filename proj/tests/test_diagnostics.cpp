#include "synthetic.hpp"

#include "ctlab/diagnostics.hpp"
#include "ctlab/random.hpp"
#include "ctlab/util.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <map>

using namespace ctlab;

namespace {

Sample sample(std::string id, std::string text, DecisionLabel d) {
  Sample s;
  s.id = std::move(id);
  s.text = std::move(text);
  s.labels = LabelVector::from_decision(d);
  return s;
}

double scalar_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<long double>(a[i]) * b[i];
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  return static_cast<double>(dot / std::sqrt(na * nb));
}

const std::vector<std::string> kFixtureVocab = {"মানুষ", "কাফের", "দেশ", "মার", "##র"};

}  // namespace

TEST_CASE("frequent words of a single sample") {
  const Corpus c({sample("a", "x x y", DecisionLabel::Ethno), sample("b", "z z z", DecisionLabel::Religio)});
  const auto top = frequent_words(c, ClassId::Ethno, 5);
  CHECK(top == std::vector<WordCount>{{"x", 2}, {"y", 1}});
  CHECK_THROWS_AS(frequent_words(c, ClassId::Noncommunal, 5), EmptyInputError);
}

TEST_CASE("frequent words match a counting oracle") {
  Rng rng(2);
  const std::vector<std::string> words = {"ক", "খ", "গ", "ঘ", "ঙ", "চ", "ছ", "জ"};
  std::vector<Sample> samples;
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> toks;
    for (std::size_t k = 0, n = 1 + rng.below(8); k < n; ++k) toks.push_back(words[rng.below(words.size())]);
    samples.push_back(sample("r" + std::to_string(i), join(toks, " "), static_cast<DecisionLabel>(rng.below(2))));
  }
  const Corpus c(samples);
  std::map<std::string, std::size_t> counts;
  for (const auto& s : samples)
    if (s.labels[ClassId::Ethno])
      for (const auto& w : split_whitespace(s.text)) ++counts[w];
  std::vector<WordCount> oracle;
  for (const auto& [w, n] : counts) oracle.push_back({w, n});
  std::stable_sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) { return a.count > b.count; });
  oracle.resize(5);
  CHECK(frequent_words(c, ClassId::Ethno, 5) == oracle);
}

TEST_CASE("word vectors average their subword rows") {
  auto dir = testing::temp_dir("wv");
  testing::write_pretrained_fixture(dir / "enc", kFixtureVocab, 8, 3);
  const auto src = embedding_source(EncoderRegistry({dir}), "enc");
  const auto& tok = *src.tokenizer;

  const auto single = tok.word_ids("দেশ");
  REQUIRE(single.size() == 1);
  CHECK(word_vector("দেশ", src) == src.table.row(single[0]).transpose());

  const auto pair = tok.word_ids("মারর");
  REQUIRE(pair.size() == 2);
  const Eigen::VectorXd mean = (src.table.row(pair[0]) + src.table.row(pair[1])).transpose() / 2.0;
  CHECK((word_vector("মারর", src) - mean).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(word_vector("মানুষ", src) == word_vector("মানুষ", src));

  CHECK_THROWS_AS(embedding_source(EncoderRegistry({dir}), "tiny"), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("cosine against a scalar oracle") {
  Rng rng(4);
  for (int t = 0; t < 1000; ++t) {
    const auto n = static_cast<Eigen::Index>(1 + rng.below(64));
    std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      a[static_cast<std::size_t>(i)] = rng.normal(0, 1);
      b[static_cast<std::size_t>(i)] = rng.normal(0, 1);
    }
    const Eigen::Map<const Eigen::VectorXd> u(a.data(), n), v(b.data(), n);
    CHECK(std::abs(cosine(u, v) - scalar_cosine(a, b)) < 1e-6);
    CHECK(cosine(u, v) == cosine(v, u));
    CHECK(std::abs(cosine(u, u) - 1.0) < 1e-12);
  }
  CHECK(cosine(Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY()) == 0.0);
  CHECK_THROWS_AS(cosine(Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitY()), ValidationError);
  CHECK_THROWS_AS(cosine(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(2)), ValidationError);
  CHECK(std::abs(cosine(Eigen::Vector3f(1, 2, 3), Eigen::Vector3f(3, 2, 1)) - 10.0f / 14.0f) < 1e-6f);
}

TEST_CASE("similarity tables are symmetric") {
  auto dir = testing::temp_dir("sim");
  testing::write_pretrained_fixture(dir / "a", kFixtureVocab, 8, 1);
  testing::write_pretrained_fixture(dir / "b", kFixtureVocab, 12, 2);
  const EncoderRegistry reg({dir});
  const std::vector<EmbeddingSource> sources = {embedding_source(reg, "a"), embedding_source(reg, "b")};
  std::vector<std::pair<std::string, std::string>> pairs = {{"মানুষ", "কাফের"}, {"দেশ", "মারর"}, {"দেশ", "দেশ"}};
  auto reversed = pairs;
  for (auto& [x, y] : reversed) std::swap(x, y);
  const auto t1 = similarity_table(pairs, sources);
  const auto t2 = similarity_table(reversed, sources);
  REQUIRE(t1.size() == 6);
  for (std::size_t i = 0; i < t1.size(); ++i) CHECK(t1[i].cosine == t2[i].cosine);
  CHECK(std::abs(t1[4].cosine - 1.0) < 1e-12);
  CHECK(t1[0].encoder_id == "a");
  CHECK(t1[1].encoder_id == "b");
  const auto csv = similarity_csv(t1);
  CHECK(csv.starts_with("word_a,word_b,a,b\n"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  std::filesystem::remove_all(dir);
}

TEST_CASE("explanations find the keyed token") {
  const auto stub = testing::keyed_stub("X");
  Rng rng(6);
  const std::vector<std::string> filler = {"আমরা", "সবাই", "এক", "দেশ", "মানুষ", "ভালো", "কথা", "আজ", "কাল", "পথ"};
  int hits = 0;
  for (int run = 0; run < 20; ++run) {
    std::vector<std::string> toks;
    for (int i = 0; i < 8; ++i) toks.push_back(filler[rng.below(filler.size())]);
    toks.insert(toks.begin() + static_cast<long>(rng.below(toks.size() + 1)), "X");
    ExplainOptions opt;
    opt.seed = static_cast<std::uint64_t>(run);
    opt.n_samples = 500;
    const auto e = explain(join(toks, " "), stub, ClassId::Religio, opt);
    if (!e.features.empty() && e.features[0].first == "X" && e.features[0].second > 0) ++hits;
    CHECK(e.base_score == 0.9);
  }
  CHECK(hits >= 19);
}

TEST_CASE("a constant model explains nothing") {
  testing::FnPredictor flat([](const std::string&) { return std::array<double, 4>{0.4, 0.4, 0.4, 0.4}; });
  const auto e = explain("এক দুই তিন চার পাঁচ", flat, ClassId::Ethno);
  for (const auto& [w, b] : e.features) CHECK(std::abs(b) < 1e-3);
}

TEST_CASE("explanations are reproducible") {
  const auto stub = testing::keyed_stub("X", 2);
  ExplainOptions opt;
  opt.seed = 17;
  const auto a = explain("ক খ X গ ঘ", stub, ClassId::Nondenominational, opt);
  const auto b = explain("ক খ X গ ঘ", stub, ClassId::Nondenominational, opt);
  CHECK(a.features == b.features);
  CHECK(a.intercept == b.intercept);
  CHECK(explanation_json(a) == explanation_json(b));
  const auto j = nlohmann::json::parse(explanation_json(a));
  CHECK(j["features"].size() == 5);
  CHECK(explanation_html({a}).find("<html") != std::string::npos);
  CHECK_THROWS_AS(explain("   ", stub, ClassId::Religio), EmptyInputError);
}

TEST_CASE("trigger coverage") {
  const std::vector<std::string> texts = {"ধর্ম নিয়ে কথা", "সাধারণ কথা", "কাফের বলে", "আজ বৃষ্টি"};
  CHECK(trigger_coverage(texts, {"ধর্ম", "কাফের"}) == 0.5);
  CHECK(trigger_coverage(texts, {}) == 0.0);
  CHECK(trigger_coverage(texts, {"ধর্ম"}) == 0.25);
  CHECK(trigger_coverage(texts, {"ধর্"}) == 0.0);  // whole tokens only
  CHECK_THROWS_AS(trigger_coverage({}, {"ধর্ম"}), EmptyInputError);

  // adding triggers never lowers coverage
  std::set<std::string> triggers;
  double last = 0;
  for (const auto* w : {"কথা", "বলে", "আজ", "নিয়ে"}) {
    triggers.insert(w);
    const double c = trigger_coverage(texts, triggers);
    CHECK(c >= last);
    last = c;
  }
}
