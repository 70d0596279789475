#include "synthetic.hpp"

#include "ctlab/corpus.hpp"
#include "ctlab/error.hpp"
#include "ctlab/random.hpp"
#include "ctlab/util.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

using namespace ctlab;

namespace {

const char* kCsv =
    "id,text,religio,ethno,nondenominational,noncommunal\n"
    "a,\"ধর্ম নিয়ে, কথা\",1,0,0,0\n"
    "b,পাহাড়ি,0,1,0,0\n"
    "c,মার,0,0,0,1\n";

Sample sample(std::string id, int cls) {
  Sample s;
  s.id = std::move(id);
  s.text = "t " + s.id;
  if (cls >= 0) s.labels.flags[static_cast<std::size_t>(cls)] = 1;
  return s;
}

}  // namespace

TEST_CASE("three well-formed rows") {
  auto c = parse_corpus_csv(kCsv);
  CHECK(c.size() == 3);
  CHECK(c.counts() == ClassCounts{1, 1, 0, 1});
  CHECK(c.at("a").text == "ধর্ম নিয়ে, কথা");
}

TEST_CASE("exclusivity violation names the row") {
  const std::string bad = "id,text,religio,ethno,nondenominational,noncommunal\nx,t,1,0,0,1\n";
  try {
    parse_corpus_csv(bad);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("x") != std::string::npos);
  }
}

TEST_CASE("malformed rows and duplicate ids") {
  CHECK_THROWS_AS(parse_corpus_csv("id,text,religio,ethno,nondenominational,noncommunal\na,t,1,0,0\n"), ParseError);
  CHECK_THROWS_AS(parse_corpus_csv("id,text,religio,ethno,nondenominational,noncommunal\na,t,2,0,0,0\n"),
                  ValidationError);
  CHECK_THROWS_AS(parse_corpus_csv("id,text,religio,ethno,nondenominational,noncommunal\na,t,1,0,0,0\na,u,1,0,0,0\n"),
                  ValidationError);
  CHECK_THROWS_AS(parse_corpus_csv("id,body,religio,ethno,nondenominational,noncommunal\n"), ParseError);
  CHECK_THROWS_AS(parse_corpus_jsonl("{\"id\":\"a\",\"text\":\"t\",\"religio\":1}\n"), ParseError);
  try {
    parse_corpus_csv("id,text,religio,ethno,nondenominational,noncommunal\na,t,1,0,0,0\nb,t,1,0\n");
  } catch (const ParseError& e) {
    CHECK(e.row() == 2);  // data rows count from 1 after the header
  }
}

TEST_CASE("optional columns pass through") {
  auto c = parse_corpus_csv(
      "id,text,religio,ethno,nondenominational,noncommunal,sublabel,provenance,needs_context\n"
      "a,t,1,0,0,0,2,paraphrase,1\n");
  CHECK(c.at("a").sublabel == std::optional<std::string>("2"));
  CHECK(c.at("a").provenance == Provenance::Paraphrase);
  CHECK(c.at("a").needs_context);
}

TEST_CASE("canonical serialization round-trips byte-identically") {
  auto c = testing::separable_corpus(57, 4, true);
  const auto jsonl = to_jsonl(c);
  CHECK(to_jsonl(parse_corpus_jsonl(jsonl)) == jsonl);
  const auto csv = to_csv(c);
  CHECK(to_csv(parse_corpus_csv(csv)) == csv);
  CHECK(to_jsonl(parse_corpus_csv(csv)) == jsonl);
  CHECK(parse_corpus_jsonl(jsonl).fingerprint() == c.fingerprint());
}

TEST_CASE("class distribution") {
  Corpus c({sample("1", 0), sample("2", 0), sample("3", 1), sample("4", 1)});
  auto d = class_distribution(c, true);
  CHECK(d.fraction[0] == doctest::Approx(0.5));
  CHECK(d.fraction[1] == doctest::Approx(0.5));
  CHECK(d.fraction[2] == 0.0);
  CHECK(d.fraction[3] == 0.0);

  Corpus calm({sample("1", -1)});
  CHECK_THROWS_AS(class_distribution(calm, true), EmptyInputError);
  CHECK_THROWS_AS(class_distribution(Corpus{}, false), EmptyInputError);
}

TEST_CASE("single-label fractions sum to one") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto c = testing::separable_corpus(40 + seed * 7, seed, true);
    auto d = class_distribution(c, true);
    double sum = 0;
    for (double f : d.fraction) sum += f;
    CHECK(std::abs(sum - 1.0) < 1e-9);
    auto all = class_distribution(c, false);
    sum = all.nonviolent;
    for (double f : all.fraction) sum += f;
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("1000 samples split 680 / 120 / 200") {
  auto c = testing::separable_corpus(1000, 0, true);
  auto s = split(c, 11);
  CHECK(s.train.size() == 680);
  CHECK(s.val.size() == 120);
  CHECK(s.test.size() == 200);
  auto again = split(c, 11);
  CHECK(again.train == s.train);
  CHECK(again.val == s.val);
  CHECK(again.test == s.test);
  CHECK(split(c, 12).test != s.test);
}

TEST_CASE("split is a stratified partition for random corpora") {
  Rng rng(99);
  for (int round = 0; round < 30; ++round) {
    const std::size_t n = 10 + rng.below(300);
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < n; ++i) samples.push_back(sample("r" + std::to_string(i), static_cast<int>(rng.below(5)) - 1));
    Corpus c(std::move(samples));
    auto s = split(c, rng.next());

    std::vector<std::string> all;
    for (const auto* part : {&s.train, &s.val, &s.test}) all.insert(all.end(), part->begin(), part->end());
    std::vector<std::string> want;
    for (const auto& x : c.samples()) want.push_back(x.id);
    std::sort(all.begin(), all.end());
    std::sort(want.begin(), want.end());
    CHECK(all == want);  // coverage and, with equal length, disjointness
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());

    const double test_target = 0.2 * static_cast<double>(n);
    CHECK(std::abs(static_cast<double>(s.test.size()) - test_target) <= 1.0);
    const double val_target = 0.15 * static_cast<double>(n - s.test.size());
    CHECK(std::abs(static_cast<double>(s.val.size()) - val_target) <= 1.0);

    // per-stratum shares stay within one of the test ratio
    std::map<DecisionLabel, std::pair<int, int>> strata;
    std::set<std::string> test(s.test.begin(), s.test.end());
    for (const auto& x : c.samples()) {
      auto& [total, in_test] = strata[x.labels.decision()];
      ++total;
      in_test += test.contains(x.id);
    }
    for (const auto& [d, p] : strata) CHECK(std::abs(p.second - 0.2 * p.first) <= 1.0);
  }
}

TEST_CASE("split errors and json round trip") {
  std::vector<Sample> few;
  for (int i = 0; i < 5; ++i) few.push_back(sample(std::to_string(i), 0));
  CHECK_THROWS_AS(split(Corpus(few), 0), ValidationError);

  auto c = testing::separable_corpus(100, 2);
  auto s = split(c, 5);
  auto back = split_from_json(split_to_json(s));
  CHECK(back.train == s.train);
  CHECK(back.val == s.val);
  CHECK(back.test == s.test);
  CHECK(back.seed == 5);
  CHECK(s.part_of(s.test.front()) == SplitSpec::Part::Test);
  CHECK_FALSE(s.part_of("nope").has_value());
}

TEST_CASE("file loading picks the format from the extension") {
  auto dir = testing::temp_dir("corpus");
  auto c = testing::separable_corpus(12, 1);
  save_corpus(c, dir / "c.jsonl");
  save_corpus(c, dir / "c.csv");
  CHECK(load_corpus(dir / "c.jsonl").fingerprint() == c.fingerprint());
  CHECK(load_corpus(dir / "c.csv").fingerprint() == c.fingerprint());
  CHECK_THROWS_AS(load_corpus(dir / "missing.csv"), ConfigError);
  CHECK_THROWS_AS(format_from_path("x.parquet"), ConfigError);
  std::filesystem::remove_all(dir);
}
