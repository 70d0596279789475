#include "synthetic.hpp"

#include "ctlab/decision.hpp"
#include "ctlab/metrics.hpp"
#include "ctlab/random.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

using namespace ctlab;

namespace {

struct Counts {
  int tp = 0, fp = 0, fn = 0;
};

Counts count(const std::vector<std::uint8_t>& p, const std::vector<std::uint8_t>& g) {
  Counts c;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] && g[i]) ++c.tp;
    if (p[i] && !g[i]) ++c.fp;
    if (!p[i] && g[i]) ++c.fn;
  }
  return c;
}

double safe_div(double a, double b) { return b == 0 ? 0.0 : a / b; }

}  // namespace

TEST_CASE("macro F1 of known per-class rows") {
  CHECK(std::abs(macro_f1({0.47, 0.66, 0.69, 0.57}) - 0.5975) < 1e-9);
  CHECK(std::abs(macro_f1({0.571, 0.671, 0.763, 0.511}) - 0.629) < 1e-9);
}

TEST_CASE("per-class PRF matches a counting oracle") {
  Rng rng(1);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = rng.below(40);
    const double rate = rng.uniform();
    std::vector<std::uint8_t> p(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.uniform() < rate;
      g[i] = rng.uniform() < rate;
    }
    const auto c = count(p, g);
    const double prec = safe_div(c.tp, c.tp + c.fp);
    const double rec = safe_div(c.tp, c.tp + c.fn);
    const double f1 = safe_div(2 * prec * rec, prec + rec);
    const auto got = per_class_prf(p, g);
    CHECK(got.precision == doctest::Approx(prec).epsilon(1e-12));
    CHECK(got.recall == doctest::Approx(rec).epsilon(1e-12));
    CHECK(got.f1 == doctest::Approx(f1).epsilon(1e-12));
  }
}

TEST_CASE("a class never predicted and never right scores all zeros") {
  const std::vector<std::uint8_t> pred(20, 0), gold = {1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  const auto prf = per_class_prf(pred, gold);
  CHECK(prf.precision == 0.0);
  CHECK(prf.recall == 0.0);
  CHECK(prf.f1 == 0.0);
  const std::vector<std::uint8_t> none(5, 0);
  CHECK(per_class_prf(none, none).f1 == 0.0);
}

TEST_CASE("confusion matrix matches a counting oracle") {
  Rng rng(2);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = rng.below(60);
    std::vector<DecisionLabel> p(n), g(n);
    long oracle[5][5] = {};
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = static_cast<DecisionLabel>(rng.below(5));
      g[i] = static_cast<DecisionLabel>(rng.below(5));
      ++oracle[static_cast<int>(g[i])][static_cast<int>(p[i])];
    }
    const auto m = confusion_matrix(p, g);
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 5; ++c) CHECK(m(r, c) == oracle[r][c]);
    CHECK(m.sum() == static_cast<long>(n));
  }
}

TEST_CASE("length mismatches are rejected") {
  const std::vector<std::uint8_t> a(3, 0), b(4, 0);
  CHECK_THROWS_AS(per_class_prf(a, b), ValidationError);
  const std::vector<DecisionLabel> x(2), y(3);
  CHECK_THROWS_AS(confusion_matrix(x, y), ValidationError);
}

TEST_CASE("evaluate assembles per-class and confusion views") {
  ProbabilityMatrix probs(4, 4);
  probs << 0.9, 0.1, 0.1, 0.1,   //
      0.2, 0.8, 0.1, 0.1,        //
      0.1, 0.1, 0.1, 0.1,        //
      0.6, 0.1, 0.1, 0.7;
  std::vector<LabelVector> gold(4);
  gold[0].flags = {1, 0, 0, 0};
  gold[1].flags = {0, 1, 0, 0};
  gold[2].flags = {0, 0, 1, 0};
  gold[3].flags = {0, 0, 0, 1};
  const auto rep = evaluate(binarize(probs, 0.5), decide_rows(probs, 0.5), gold);
  CHECK(rep.per_class[0].precision == doctest::Approx(0.5));
  CHECK(rep.per_class[0].recall == 1.0);
  CHECK(rep.per_class[2].f1 == 0.0);
  CHECK(rep.per_class[3].f1 == 1.0);
  CHECK(rep.confusion(2, 4) == 1);  // nondenominational predicted non-violent
  CHECK(rep.support == std::array<std::size_t, 4>{1, 1, 1, 1});
  CHECK(rep.macro_f1 == doctest::Approx((2.0 / 3.0 + 1.0 + 0.0 + 1.0) / 4.0));

  const auto j = nlohmann::json::parse(to_json(rep));
  CHECK(j.at("macro_f1").get<double>() == doctest::Approx(rep.macro_f1));
  CHECK(render_table(rep).find("Nondenominational") != std::string::npos);
  CHECK(render_table(rep).find("0.00") != std::string::npos);
  CHECK(confusion_csv(rep.confusion).find("NonViolent") != std::string::npos);
  CHECK(confusion_svg(rep.confusion, "demo").rfind("<svg", 0) == 0);
}

TEST_CASE("misclassification report ordering and sampling") {
  auto corpus = testing::separable_corpus(30, 3);
  std::vector<std::string> ids;
  ProbabilityMatrix probs = ProbabilityMatrix::Zero(30, 4);
  Rng rng(4);
  for (std::size_t i = 0; i < 30; ++i) {
    ids.push_back(corpus.samples()[i].id);
    probs(static_cast<Eigen::Index>(i), static_cast<int>(rng.below(4))) = 0.5 + 0.5 * rng.uniform();
  }
  const auto decisions = decide_rows(probs, 0.5);
  const auto rep = misclassification_report(corpus, ids, decisions, probs);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < 30; ++i) wrong += decisions[i] != corpus.samples()[i].labels.decision();
  CHECK(rep.size() == wrong);
  for (std::size_t i = 1; i < rep.size(); ++i) CHECK(rep[i - 1].score >= rep[i].score);
  for (const auto& m : rep) CHECK(m.gold != m.pred);

  const auto a = subsample(rep, 5, 9), b = subsample(rep, 5, 9);
  CHECK(a.size() == std::min<std::size_t>(5, rep.size()));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].id == b[i].id);
  CHECK(subsample(rep, 1000, 1).size() == rep.size());
}
